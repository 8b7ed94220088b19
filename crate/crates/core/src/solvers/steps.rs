//! Single-step operators.

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::oracle::{Oracle, StochasticOracle};
use crate::point::Point;
use crate::resolvent::ResolventMap;

/// `z − γFz`; one oracle call.
pub fn gda_step<O: Oracle + ?Sized>(oracle: &mut O, z: &Point, gamma: f64) -> Point {
    let f = oracle.query(z);
    z.axpy(-gamma, &f)
}

/// `J_{γA}(z − γFz)`; one oracle call.
pub fn projected_gda_step<O: Oracle + ?Sized>(
    oracle: &mut O,
    a: &ResolventMap,
    z: &Point,
    gamma: f64,
) -> Point {
    a.apply_unchecked(&gda_step(oracle, z, gamma))
}

/// `z − γF(z − γFz)`; two oracle calls.
pub fn eg_step<O: Oracle + ?Sized>(oracle: &mut O, z: &Point, gamma: f64) -> Point {
    let half = gda_step(oracle, z, gamma);
    let f = oracle.query(&half);
    z.axpy(-gamma, &f)
}

/// Extragradient with both half-steps projected; two oracle calls.
pub fn projected_eg_step<O: Oracle + ?Sized>(
    oracle: &mut O,
    a: &ResolventMap,
    z: &Point,
    gamma: f64,
) -> Point {
    let half = projected_gda_step(oracle, a, z, gamma);
    let f = oracle.query(&half);
    a.apply_unchecked(&z.axpy(-gamma, &f))
}

/// `(1 − λ)z + λ EG(z)`; two oracle calls.
pub fn egplus_step<O: Oracle + ?Sized>(
    oracle: &mut O,
    z: &Point,
    gamma: f64,
    lambda: f64,
) -> Result<Point> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::param(format!("EG+ needs lambda in (0, 1), got {lambda}")));
    }
    Ok(z.lerp(&eg_step(oracle, z, gamma), lambda))
}

/// Constrained EG+ step `z + 2α(Hw̄ − Hz)` with `H = id − γF` and
/// `w̄ = J_{γA}(Hz)`. Returns `(next, w̄)`; two oracle calls.
pub fn cegplus_step<O: Oracle + ?Sized>(
    oracle: &mut O,
    a: &ResolventMap,
    z: &Point,
    gamma: f64,
    alpha: f64,
) -> (Point, Point) {
    let hz = gda_step(oracle, z, gamma);
    let w_bar = a.apply_unchecked(&hz);
    let hw = gda_step(oracle, &w_bar, gamma);
    let next = z.axpy(2.0 * alpha, &(&hw - &hz));
    (next, w_bar)
}

/// Forward-backward-forward: `z − (Hz − Hz̄)` with `z̄ = J_{γA}(Hz)`.
pub fn fbf_step<O: Oracle + ?Sized>(
    oracle: &mut O,
    a: &ResolventMap,
    z: &Point,
    gamma: f64,
) -> Point {
    cegplus_step(oracle, a, z, gamma, 0.5).0
}

/// Approximate proximal step: `τ` fixed-point iterations of
/// `w ↦ J_{γA}(z − γF̂(w))` from `w⁰ = z`, each averaging `batch` samples.
///
/// The map is a `γL`-contraction whose fixed point is `J_{γS}(z)`, so the
/// deterministic error after `τ` steps is at most `(γL)^τ ‖z − J_{γS}(z)‖`.
pub fn approx_prox(
    oracle: &mut StochasticOracle,
    a: &ResolventMap,
    z: &Point,
    gamma: f64,
    tau: usize,
    batch: usize,
) -> Result<Point> {
    z.ensure_dim(oracle.dim())?;
    if !(gamma > 0.0) {
        return Err(Error::param(format!("gamma must be > 0, got {gamma}")));
    }
    if tau == 0 || batch == 0 {
        return Err(Error::param("approx_prox needs tau >= 1 and batch >= 1"));
    }
    if let Some(l) = oracle.base().lipschitz {
        if gamma * l >= 1.0 {
            return Err(Error::param(format!(
                "approximate proximal step needs gamma*L < 1, got {}",
                gamma * l
            )));
        }
    }
    let mut w = z.clone();
    for _ in 0..tau {
        let f = oracle.eval(&w, batch);
        w = a.apply_unchecked(&z.axpy(-gamma, &f));
    }
    Ok(w)
}

/// Inner loop of the approximate proximal step without validation, drawing
/// from the oracle at its current batch.
pub(crate) fn prox_inner<O: Oracle + ?Sized>(
    oracle: &mut O,
    a: &ResolventMap,
    z: &Point,
    gamma: f64,
    tau: usize,
) -> Point {
    let mut w = z.clone();
    for _ in 0..tau {
        let f = oracle.query(&w);
        w = a.apply_unchecked(&z.axpy(-gamma, &f));
    }
    w
}

/// Deterministic approximate proximal step on the exact field, uncounted.
/// Used as a reference resolvent on nonlinear problems.
pub fn prox_reference(
    field: &VectorField,
    a: &ResolventMap,
    z: &Point,
    gamma: f64,
    tau: usize,
) -> Point {
    let mut w = z.clone();
    for _ in 0..tau {
        w = a.apply_unchecked(&z.axpy(-gamma, &field.eval(&w)));
    }
    w
}

/// One Lookahead-GDA step with `τ = 2` written as the average of a GDA step
/// and an EG+ step, both with stepsize `2λγ`.
pub fn la_gda_tau2_closed_form<O: Oracle + ?Sized>(
    oracle: &mut O,
    z: &Point,
    gamma: f64,
    lambda: f64,
) -> Point {
    let fz = oracle.query(z);
    let half = z.axpy(-gamma, &fz);
    let f_half = oracle.query(&half);
    let s = 2.0 * lambda * gamma;
    let gda = z.axpy(-s, &fz);
    let egp = z.axpy(-s, &f_half);
    gda.lerp(&egp, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::BoxBounds;
    use crate::problems;
    use proptest::prelude::*;

    fn bilinear() -> VectorField {
        problems::quadratic_field(1.0, 0.0).unwrap().field
    }

    fn identity_field() -> VectorField {
        problems::quadratic_field(0.0, 1.0).unwrap().field
    }

    fn p(x: f64, y: f64) -> Point {
        Point::from([x, y])
    }

    fn approx_eq(a: &Point, b: &Point, tol: f64) -> bool {
        a.max_abs_diff(b) <= tol
    }

    #[test]
    fn gda_examples() {
        let f = bilinear();
        let mut o = f.counting();
        assert_eq!(gda_step(&mut o, &p(1.0, 0.0), 0.5), p(1.0, 0.5));
        assert_eq!(o.calls(), 1);
        assert_eq!(gda_step(&mut o, &Point::zeros(2), 0.5), Point::zeros(2));
        let id = identity_field();
        assert_eq!(gda_step(&mut id.counting(), &p(1.0, 0.0), 0.5), p(0.5, 0.0));
    }

    #[test]
    fn eg_examples() {
        let f = bilinear();
        let mut o = f.counting();
        let next = eg_step(&mut o, &p(1.0, 0.0), 0.5);
        assert_eq!(next, p(0.75, 0.5));
        assert_eq!(o.calls(), 2);
        assert!(next.norm() < 1.0);
        assert!((next.norm() - 0.8125f64.sqrt()).abs() < 1e-15);
        assert_eq!(eg_step(&mut o, &Point::zeros(2), 0.5), Point::zeros(2));
    }

    #[test]
    fn egplus_examples() {
        let f = bilinear();
        let z = p(1.0, 0.0);
        let next = egplus_step(&mut f.counting(), &z, 0.5, 0.5).unwrap();
        assert_eq!(next, p(0.875, 0.25));
        let near_one = egplus_step(&mut f.counting(), &z, 0.5, 1.0 - 1e-12).unwrap();
        assert!(approx_eq(&near_one, &eg_step(&mut f.counting(), &z, 0.5), 1e-10));
        assert!(egplus_step(&mut f.counting(), &z, 0.5, 1.0).is_err());
        assert!(egplus_step(&mut f.counting(), &z, 0.5, 0.0).is_err());
    }

    #[test]
    fn cegplus_examples() {
        let f = bilinear();
        let id = ResolventMap::Identity;
        let z = p(1.0, 0.0);
        let mut o = f.counting();
        let (next, _) = cegplus_step(&mut o, &id, &z, 0.5, 0.5);
        assert!(approx_eq(&next, &p(0.75, 0.5), 1e-15));
        assert_eq!(o.calls(), 2);
        let (next, _) = cegplus_step(&mut o, &id, &z, 0.5, 0.25);
        assert!(approx_eq(&next, &p(0.875, 0.25), 1e-15));

        let b = ResolventMap::Box(BoxBounds::symmetric(2, 0.5));
        let (next, w_bar) = cegplus_step(&mut o, &b, &z, 0.5, 0.5);
        assert!(approx_eq(&next, &p(0.25, 0.25), 1e-15));
        assert_eq!(w_bar, p(0.5, 0.5));
    }

    #[test]
    fn fbf_examples() {
        let f = bilinear();
        let z = p(1.0, 0.0);
        let next = fbf_step(&mut f.counting(), &ResolventMap::Identity, &z, 0.5);
        assert!(approx_eq(&next, &p(0.75, 0.5), 1e-15));
        let b = ResolventMap::Box(BoxBounds::symmetric(2, 0.5));
        let next = fbf_step(&mut f.counting(), &b, &z, 0.5);
        assert!(approx_eq(&next, &p(0.25, 0.25), 1e-15));
        // a zero inside the box is fixed
        assert_eq!(fbf_step(&mut f.counting(), &b, &Point::zeros(2), 0.5), Point::zeros(2));
    }

    #[test]
    fn approx_prox_examples() {
        let f = bilinear();
        let id = ResolventMap::Identity;
        let z = p(1.0, 0.0);
        let mut o = StochasticOracle::new(f.clone(), 0.0, 0).unwrap();
        let w = approx_prox(&mut o, &id, &z, 0.5, 200, 1).unwrap();
        assert!(approx_eq(&w, &p(0.8, 0.4), 1e-15));
        assert_eq!(o.calls(), 200);

        let w1 = approx_prox(&mut o, &id, &z, 0.5, 1, 1).unwrap();
        assert_eq!(w1, p(1.0, 0.5));
        let j = p(0.8, 0.4);
        assert!((w1.dist(&j) - 0.05f64.sqrt()).abs() < 1e-15);
        assert!((z.dist(&j) - 0.2f64.sqrt()).abs() < 1e-15);
        assert!((w1.dist(&j) - 0.5 * z.dist(&j)).abs() < 1e-15);

        let w = approx_prox(&mut o, &id, &Point::zeros(2), 0.5, 1, 1).unwrap();
        assert_eq!(w, Point::zeros(2));

        assert!(matches!(approx_prox(&mut o, &id, &z, 1.0, 3, 1), Err(Error::Parameter(_))));
        assert!(approx_prox(&mut o, &id, &z, 0.5, 0, 1).is_err());
        assert!(approx_prox(&mut o, &id, &Point::zeros(3), 0.5, 1, 1).is_err());
    }

    #[test]
    fn approx_prox_counts_batches() {
        let mut o = StochasticOracle::new(bilinear(), 0.1, 3).unwrap();
        approx_prox(&mut o, &ResolventMap::Identity, &p(1.0, 0.0), 0.5, 4, 9).unwrap();
        assert_eq!(o.calls(), 36);
    }

    #[test]
    fn la_gda_closed_form_examples() {
        let f = bilinear();
        let z = p(1.0, 0.0);
        let v = la_gda_tau2_closed_form(&mut f.counting(), &z, 0.5, 0.25);
        assert!(approx_eq(&v, &p(0.9375, 0.25), 1e-15));
        assert_eq!(la_gda_tau2_closed_form(&mut f.counting(), &z, 0.5, 0.0), z);
        let zero = Point::zeros(2);
        assert_eq!(la_gda_tau2_closed_form(&mut f.counting(), &zero, 0.5, 0.3), zero);
    }

    proptest! {
        #[test]
        fn fbf_is_quasi_nonexpansive_on_bilinear(
            x in -3.0f64..3.0, y in -3.0f64..3.0, gamma in 0.01f64..=1.0,
        ) {
            let f = bilinear();
            let z = p(x, y);
            let next = fbf_step(&mut f.counting(), &ResolventMap::Identity, &z, gamma);
            prop_assert!(next.norm() <= z.norm() + 1e-12);
        }

        #[test]
        fn banach_contraction_on_linear_fields(
            x in -3.0f64..3.0, y in -3.0f64..3.0, tau in 1usize..=20,
            l in 0.5f64..2.0, t in -0.99f64..0.99, c in 0.05f64..0.95,
        ) {
            let spec = problems::quadratic_from_constants(l, t / l).unwrap();
            let gamma = c / l;
            let z = p(x, y);
            let j = spec.field.linear_resolvent(gamma, &z).unwrap();
            let mut o = StochasticOracle::new(spec.field.clone(), 0.0, 0).unwrap();
            let w = approx_prox(&mut o, &ResolventMap::Identity, &z, gamma, tau, 1).unwrap();
            prop_assert!(w.dist(&j) <= c.powi(tau as i32) * z.dist(&j) + 1e-12);
        }
    }
}
