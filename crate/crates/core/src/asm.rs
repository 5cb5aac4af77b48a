//! Conventional adaptive smoothing: a free-flow and a congested a priori field
//! blended by a tanh weight driven by the slower of the two.

use ndarray::{Array2, Zip};

use crate::error::{Error, Result};
use crate::grid::SpeedField;
use crate::kernel::PrioriBank;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsmParams {
    /// Threshold speed, km/h.
    pub v_thr: f64,
    /// Transition width, km/h.
    pub delta_v: f64,
}

impl Default for AsmParams {
    fn default() -> Self {
        AsmParams {
            v_thr: 60.0,
            delta_v: 20.0,
        }
    }
}

impl AsmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_thr > 0.0 && self.v_thr.is_finite()) {
            return Err(Error::param("v_thr", format!("must be positive, got {}", self.v_thr)));
        }
        if !(self.delta_v > 0.0 && self.delta_v.is_finite()) {
            return Err(Error::param("delta_v", format!("must be positive, got {}", self.delta_v)));
        }
        Ok(())
    }
}

/// Congestion weight `0.5 * (1 + tanh((v_thr - min(z_free, z_cong)) / delta_v))`.
pub fn asm_weight(z_free: &SpeedField, z_cong: &SpeedField, params: &AsmParams) -> Result<Array2<f64>> {
    params.validate()?;
    z_free.grid().ensure_same(z_cong.grid(), "free and congested fields")?;
    z_free.ensure_dense("free-flow field")?;
    z_cong.ensure_dense("congested field")?;
    Ok(Zip::from(z_free.values())
        .and(z_cong.values())
        .map_collect(|&f, &c| 0.5 * (1.0 + ((params.v_thr - f.min(c)) / params.delta_v).tanh())))
}

#[derive(Debug, Clone)]
pub struct AsmEstimate {
    pub field: SpeedField,
    /// Weight on the congested field; the free field gets `1 - w_cong`.
    pub w_cong: Array2<f64>,
}

/// `W ⊙ Z_cong + (J - W) ⊙ Z_free` for a bank ordered `[free, cong]`.
pub fn asm_estimate(bank: &PrioriBank, params: &AsmParams) -> Result<AsmEstimate> {
    if bank.len() != 2 {
        return Err(Error::AsmFieldCount(bank.len()));
    }
    let (free, cong) = (bank.wave_speeds()[0], bank.wave_speeds()[1]);
    if !(free > 0.0 && cong < 0.0) {
        return Err(Error::AsmSignConvention { free, cong });
    }
    let z_free = &bank.fields()[0];
    let z_cong = &bank.fields()[1];
    let w_cong = asm_weight(z_free, z_cong, params)?;
    let fused = Zip::from(&w_cong)
        .and(z_free.values())
        .and(z_cong.values())
        .map_collect(|&w, &f, &c| w * c + (1.0 - w) * f);
    Ok(AsmEstimate {
        field: SpeedField::new(*z_free.grid(), fused)?,
        w_cong,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn field(vals: &[f64]) -> SpeedField {
        let g = GridSpec::new(0.0, 0.0, 10.0, 1.0, 1, vals.len()).unwrap();
        SpeedField::new(g, Array2::from_shape_vec((1, vals.len()), vals.to_vec()).unwrap()).unwrap()
    }

    fn bank(free: &[f64], cong: &[f64]) -> PrioriBank {
        PrioriBank::from_fields(vec![80.0, -15.0], vec![field(free), field(cong)]).unwrap()
    }

    #[test]
    fn weight_examples() {
        let p = AsmParams::default();
        let w = asm_weight(&field(&[60.0, 20.0, 100.0]), &field(&[70.0, 90.0, 120.0]), &p).unwrap();
        assert_eq!(w[(0, 0)], 0.5);
        // 0.5 * (1 + tanh(2)), 0.5 * (1 + tanh(-2))
        let expected_hi = 0.5 * (1.0 + 2.0f64.tanh());
        assert_relative_eq!(w[(0, 1)], expected_hi, epsilon = 1e-15);
        assert_relative_eq!(w[(0, 1)], 0.9820, epsilon = 5e-5);
        assert_relative_eq!(w[(0, 2)], 0.0180, epsilon = 5e-5);
    }

    #[test]
    fn equal_fields_pass_through() {
        let est = asm_estimate(&bank(&[55.0, 55.0], &[55.0, 55.0]), &AsmParams::default()).unwrap();
        assert!(est.field.values().iter().all(|v| (*v - 55.0).abs() < 1e-12));
    }

    #[test]
    fn deep_congestion_selects_congested_field() {
        // tanh saturates to 1 in f64 far below the threshold
        let p = AsmParams { v_thr: 1000.0, delta_v: 1.0 };
        let est = asm_estimate(&bank(&[80.0, 75.0], &[12.0, 18.0]), &p).unwrap();
        assert_eq!(est.w_cong, Array2::from_elem((1, 2), 1.0));
        assert_eq!(est.field.values(), bank(&[80.0, 75.0], &[12.0, 18.0]).field(1));
    }

    #[test]
    fn requires_two_signed_fields() {
        let p = AsmParams::default();
        let three = PrioriBank::from_fields(vec![80.0, -15.0, 60.0], vec![field(&[1.0]); 3]).unwrap();
        assert!(matches!(asm_estimate(&three, &p), Err(Error::AsmFieldCount(3))));
        let swapped = PrioriBank::from_fields(vec![-15.0, 80.0], vec![field(&[1.0]); 2]).unwrap();
        assert!(matches!(asm_estimate(&swapped, &p), Err(Error::AsmSignConvention { .. })));
        assert!(AsmParams { v_thr: 60.0, delta_v: 0.0 }.validate().is_err());
    }

    proptest! {
        #[test]
        fn estimate_is_between_the_fields(f in prop::collection::vec(0.0..150.0f64, 8), c in prop::collection::vec(0.0..150.0f64, 8)) {
            let est = asm_estimate(&bank(&f, &c), &AsmParams::default()).unwrap();
            for (i, v) in est.field.values().iter().enumerate() {
                prop_assert!(*v >= f[i].min(c[i]) - 1e-9 && *v <= f[i].max(c[i]) + 1e-9);
            }
            prop_assert!(est.w_cong.iter().all(|w| *w > 0.0 && *w < 1.0));
        }

        #[test]
        fn weight_decreases_with_speed(a in 0.0..150.0f64, b in 0.0..150.0f64) {
            let p = AsmParams::default();
            let (lo, hi) = (a.min(b), a.max(b));
            let w = asm_weight(&field(&[lo, hi]), &field(&[200.0, 200.0]), &p).unwrap();
            prop_assert!(w[(0, 0)] >= w[(0, 1)]);
        }
    }
}
