//! Parameters and states of the attraction-repulsion system and the exact
//! change of variables that turns it into a Keller–Segel system with an
//! additional linear coupling.
//!
//! Original unknowns `(u, v₁, v₂)` with
//!
//! ```text
//! u_t  = Δu − χ∇·(u∇v₁) + ξ∇·(u∇v₂)
//! v₁_t = Δv₁ − βv₁ + αu
//! v₂_t = Δv₂ − δv₂ + γu
//! ```
//!
//! map, when `χα − ξγ > 0`, to `w = (χα−ξγ)u`, `z = χv₁ − ξv₂`, `v = v₁`
//! solving
//!
//! ```text
//! w_t = Δw − ∇·(w∇z)
//! z_t = Δz − az + bv + w
//! v_t = Δv − cv + dw
//! ```
//!
//! with `a = δ`, `b = (δ−β)χ`, `c = β`, `d = α/(χα−ξγ)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::RadialField;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("parameter {name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("parameters are not attraction-dominated (χα − ξγ = {0})")]
    NotAttractionDominated(f64),
    #[error("component {component} would be negative: {value} at cell {cell}")]
    NegativeComponent {
        component: &'static str,
        cell: usize,
        value: f64,
    },
}

fn check_positive(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonPositive { name, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOriginal")]
pub struct OriginalParams {
    pub chi: f64,
    pub xi: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOriginal {
    chi: f64,
    xi: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
    delta: f64,
}

impl TryFrom<RawOriginal> for OriginalParams {
    type Error = ModelError;
    fn try_from(r: RawOriginal) -> Result<Self, Self::Error> {
        OriginalParams::new(r.chi, r.xi, r.alpha, r.beta, r.gamma, r.delta)
    }
}

/// Sign of `χα − ξγ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    AttractionDominated,
    Balanced,
    RepulsionDominated,
}

impl OriginalParams {
    pub fn new(
        chi: f64,
        xi: f64,
        alpha: f64,
        beta: f64,
        gamma: f64,
        delta: f64,
    ) -> Result<Self, ModelError> {
        check_positive("chi", chi)?;
        check_positive("xi", xi)?;
        check_positive("alpha", alpha)?;
        check_positive("beta", beta)?;
        check_positive("gamma", gamma)?;
        check_positive("delta", delta)?;
        Ok(Self {
            chi,
            xi,
            alpha,
            beta,
            gamma,
            delta,
        })
    }

    /// `χα − ξγ`.
    pub fn dominance(&self) -> f64 {
        self.chi * self.alpha - self.xi * self.gamma
    }

    /// Exact sign test; `Balanced` only when the difference is exactly zero.
    pub fn classify(&self) -> Regime {
        self.classify_with_tolerance(0.0)
    }

    /// Treats `|χα − ξγ| ≤ eps·max(χα, ξγ)` as balanced.
    pub fn classify_with_tolerance(&self, eps: f64) -> Regime {
        let diff = self.dominance();
        let scale = (self.chi * self.alpha).max(self.xi * self.gamma);
        if diff.abs() <= eps * scale {
            Regime::Balanced
        } else if diff > 0.0 {
            Regime::AttractionDominated
        } else {
            Regime::RepulsionDominated
        }
    }

    fn require_attraction(&self) -> Result<f64, ModelError> {
        match self.classify() {
            Regime::AttractionDominated => Ok(self.dominance()),
            _ => Err(ModelError::NotAttractionDominated(self.dominance())),
        }
    }

    pub fn transform(&self) -> Result<TransformedParams, ModelError> {
        let k = self.require_attraction()?;
        Ok(TransformedParams {
            a: self.delta,
            b: (self.delta - self.beta) * self.chi,
            c: self.beta,
            d: self.alpha / k,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTransformed")]
pub struct TransformedParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransformed {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl TryFrom<RawTransformed> for TransformedParams {
    type Error = ModelError;
    fn try_from(r: RawTransformed) -> Result<Self, Self::Error> {
        TransformedParams::new(r.a, r.b, r.c, r.d)
    }
}

impl TransformedParams {
    /// `b` may have either sign; `a`, `c`, `d` must be positive.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, ModelError> {
        check_positive("a", a)?;
        check_positive("c", c)?;
        check_positive("d", d)?;
        if !b.is_finite() {
            return Err(ModelError::NonPositive { name: "b", value: b });
        }
        Ok(Self { a, b, c, d })
    }
}

pub fn classify(p: &OriginalParams) -> Regime {
    p.classify()
}

pub fn transform_params(p: &OriginalParams) -> Result<TransformedParams, ModelError> {
    p.transform()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OriginalState {
    pub u: RadialField,
    pub v1: RadialField,
    pub v2: RadialField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformedState {
    pub w: RadialField,
    pub z: RadialField,
    pub v: RadialField,
}

/// `w = (χα−ξγ)u`, `z = χv₁ − ξv₂`, `v = v₁`.
pub fn transform_state(
    s: &OriginalState,
    p: &OriginalParams,
) -> Result<TransformedState, ModelError> {
    let k = p.require_attraction()?;
    Ok(TransformedState {
        w: s.u.scaled(k),
        z: s.v1.zip_map(&s.v2, |v1, v2| p.chi * v1 - p.xi * v2),
        v: s.v1.clone(),
    })
}

/// Inverse map `u = w/(χα−ξγ)`, `v₁ = v`, `v₂ = (χv − z)/ξ`.
///
/// `χv − z` may undershoot zero by `1e−12·max(1, sup|χv|)`; such cells are
/// set to exactly zero. Larger violations are reported.
pub fn inverse_transform_state(
    t: &TransformedState,
    p: &OriginalParams,
) -> Result<OriginalState, ModelError> {
    let k = p.require_attraction()?;
    let chi_v_max = t.v.max_abs() * p.chi;
    let tol = 1e-12 * chi_v_max.max(1.0);
    let mut v2 = Vec::with_capacity(t.v.len());
    for (cell, (&v, &z)) in t.v.values().iter().zip(t.z.values()).enumerate() {
        let gap = p.chi * v - z;
        if gap < -tol {
            return Err(ModelError::NegativeComponent {
                component: "v2",
                cell,
                value: gap / p.xi,
            });
        }
        v2.push(gap.max(0.0) / p.xi);
    }
    Ok(OriginalState {
        u: t.w.scaled(1.0 / k),
        v1: t.v.clone(),
        v2: RadialField::from_vec_unchecked(t.v.grid().clone(), v2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{integrate, RadialGrid};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn p(chi: f64, xi: f64, alpha: f64, beta: f64, gamma: f64, delta: f64) -> OriginalParams {
        OriginalParams::new(chi, xi, alpha, beta, gamma, delta).unwrap()
    }

    fn grid() -> Arc<RadialGrid> {
        RadialGrid::new(1.0, 3, 16).unwrap()
    }

    #[test]
    fn classification_examples() {
        assert_eq!(p(1.0, 0.5, 1.0, 1.0, 1.0, 2.0).classify(), Regime::AttractionDominated);
        assert_eq!(p(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).classify(), Regime::Balanced);
        assert_eq!(p(1.0, 2.0, 1.0, 1.0, 1.0, 1.0).classify(), Regime::RepulsionDominated);
        let nearly = p(1.0, 1.0 + 1e-14, 1.0, 1.0, 1.0, 1.0);
        assert_eq!(nearly.classify(), Regime::RepulsionDominated);
        assert_eq!(nearly.classify_with_tolerance(1e-12), Regime::Balanced);
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert_eq!(
            OriginalParams::new(1.0, 0.0, 1.0, 1.0, 1.0, 1.0),
            Err(ModelError::NonPositive { name: "xi", value: 0.0 })
        );
        assert!(TransformedParams::new(1.0, -3.0, 1.0, 1.0).is_ok());
        assert!(TransformedParams::new(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn parameter_map_examples() {
        let t = p(2.0, 1.0, 3.0, 1.0, 1.0, 4.0).transform().unwrap();
        assert_eq!((t.a, t.b, t.c), (4.0, 6.0, 1.0));
        assert_relative_eq!(t.d, 0.6, max_relative = 1e-15);
        let t = p(1.0, 0.5, 1.0, 1.0, 1.0, 1.0).transform().unwrap();
        assert_eq!((t.a, t.b, t.c, t.d), (1.0, 0.0, 1.0, 2.0));
        assert!(matches!(
            p(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).transform(),
            Err(ModelError::NotAttractionDominated(_))
        ));
    }

    #[test]
    fn state_transform_examples() {
        let g = grid();
        let params = p(2.0, 1.0, 3.0, 1.0, 1.0, 4.0);
        let zero = OriginalState {
            u: RadialField::zeros(&g),
            v1: RadialField::zeros(&g),
            v2: RadialField::zeros(&g),
        };
        let t = transform_state(&zero, &params).unwrap();
        assert!(t.w.values().iter().chain(t.z.values()).chain(t.v.values()).all(|&x| x == 0.0));

        let ones = OriginalState {
            u: RadialField::constant(&g, 1.0),
            v1: RadialField::constant(&g, 1.0),
            v2: RadialField::constant(&g, 1.0),
        };
        let t = transform_state(&ones, &params).unwrap();
        assert!(t.w.values().iter().all(|&x| x == 5.0));
        assert!(t.z.values().iter().all(|&x| x == 1.0));
        assert!(t.v.values().iter().all(|&x| x == 1.0));

        let back = inverse_transform_state(&t, &params).unwrap();
        assert_eq!(back, ones);
    }

    #[test]
    fn boundary_of_admissibility_gives_zero_v2() {
        let g = grid();
        let params = p(2.0, 1.0, 3.0, 1.0, 1.0, 4.0);
        let v = RadialField::from_fn(&g, |r| 1.0 + r);
        let t = TransformedState {
            w: RadialField::constant(&g, 1.0),
            z: v.scaled(2.0),
            v,
        };
        let back = inverse_transform_state(&t, &params).unwrap();
        assert!(back.v2.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn inadmissible_inverse_reports_location() {
        let g = grid();
        let params = p(2.0, 1.0, 3.0, 1.0, 1.0, 4.0);
        let mut z = vec![0.0; 16];
        z[7] = 1.0;
        let t = TransformedState {
            w: RadialField::constant(&g, 1.0),
            z: RadialField::new(g.clone(), z).unwrap(),
            v: RadialField::zeros(&g),
        };
        match inverse_transform_state(&t, &params) {
            Err(ModelError::NegativeComponent { component, cell, value }) => {
                assert_eq!(component, "v2");
                assert_eq!(cell, 7);
                assert_eq!(value, -1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mass_law() {
        let g = grid();
        let params = p(2.0, 1.0, 3.0, 1.0, 1.0, 4.0);
        let s = OriginalState {
            u: RadialField::from_fn(&g, |r| (-r * r).exp()),
            v1: RadialField::constant(&g, 1.0),
            v2: RadialField::constant(&g, 0.5),
        };
        let t = transform_state(&s, &params).unwrap();
        assert_relative_eq!(integrate(&t.w), 5.0 * integrate(&s.u), max_relative = 1e-14);
    }

    #[test]
    fn params_deserialize_with_validation() {
        let ok: OriginalParams =
            toml::from_str("chi = 2.0\nxi = 1.0\nalpha = 3.0\nbeta = 1.0\ngamma = 1.0\ndelta = 4.0")
                .unwrap();
        assert_eq!(ok.dominance(), 5.0);
        let bad: Result<OriginalParams, _> =
            toml::from_str("chi = -2.0\nxi = 1.0\nalpha = 3.0\nbeta = 1.0\ngamma = 1.0\ndelta = 4.0");
        assert!(bad.is_err());
    }

    proptest! {
        #[test]
        fn round_trip(chi in 0.1f64..5.0, xi in 0.1f64..5.0, alpha in 0.1f64..5.0, gamma in 0.1f64..5.0,
                      seed_u in prop::collection::vec(0.0f64..10.0, 16),
                      seed_v1 in prop::collection::vec(0.0f64..10.0, 16),
                      seed_v2 in prop::collection::vec(0.0f64..10.0, 16)) {
            let params = OriginalParams::new(chi, xi, alpha, 1.0, gamma, 2.0).unwrap();
            prop_assume!(params.classify() == Regime::AttractionDominated);
            let g = grid();
            let s = OriginalState {
                u: RadialField::new(g.clone(), seed_u).unwrap(),
                v1: RadialField::new(g.clone(), seed_v1).unwrap(),
                v2: RadialField::new(g.clone(), seed_v2).unwrap(),
            };
            let back = inverse_transform_state(&transform_state(&s, &params).unwrap(), &params).unwrap();
            for (a, b) in [(&s.u, &back.u), (&s.v1, &back.v1), (&s.v2, &back.v2)] {
                let scale = a.max_abs().max(1.0);
                for (x, y) in a.values().iter().zip(b.values()) {
                    prop_assert!((x - y).abs() <= 1e-12 * scale);
                }
            }
        }

        #[test]
        fn regime_is_scale_invariant(chi in 0.1f64..5.0, xi in 0.1f64..5.0, lambda in 0.01f64..100.0) {
            let a = OriginalParams::new(chi, xi, 1.3, 1.0, 0.7, 1.0).unwrap();
            let b = OriginalParams::new(lambda * chi, lambda * xi, 1.3, 1.0, 0.7, 1.0).unwrap();
            let strict = |r: Regime| r != Regime::Balanced;
            if strict(a.classify()) && strict(b.classify()) {
                prop_assert_eq!(a.classify(), b.classify());
            }
        }
    }
}
