use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::rng::Rng;

use super::index::{SurfaceInstance, ViewRecord, BASE_THETAS, OFFSET_DELTA};

/// Uniformly random start of a run of `n` consecutive `true` entries.
pub fn window_start(complete: &[bool], n: usize, rng: &mut Rng) -> Result<usize> {
    if n == 0 || n > complete.len() {
        bail!(Sampling, "cannot take a window of {} from {} views", n, complete.len());
    }
    let starts: Vec<usize> = (0..=complete.len() - n).filter(|&s| complete[s..s + n].iter().all(|&c| c)).collect();
    if starts.is_empty() {
        bail!(Sampling, "no {} contiguous complete views", n);
    }
    Ok(starts[rng.below(starts.len() as u64) as usize])
}

/// `n` contiguous base views under one illumination, each with its offset
/// partner, in arc order.
pub fn sample_view_window(instance: &SurfaceInstance, illumination: &str, n: usize, rng: &mut Rng) -> Result<Vec<(ViewRecord, ViewRecord)>> {
    let complete = instance.complete_thetas(illumination);
    let start = window_start(&complete, n, rng)
        .map_err(|e| crate::Error::Sampling(alloc::format!("instance `{}`: {}", instance.instance_id, e)))?;
    Ok(BASE_THETAS[start..start + n]
        .iter()
        .map(|&t| {
            let base = instance.view(t, 0, illumination).cloned();
            let off = instance.view(t, OFFSET_DELTA, illumination).cloned();
            (base.expect("complete view"), off.expect("complete view"))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::index::ViewSource;

    fn instance() -> SurfaceInstance {
        let views = BASE_THETAS
            .iter()
            .flat_map(|&t| {
                [0, OFFSET_DELTA].map(|d| ViewRecord {
                    theta_deg: t,
                    phi_deg: 0.0,
                    delta_deg: d,
                    illumination: "illum0".into(),
                    exposure: None,
                    source: ViewSource::Seed(0),
                })
            })
            .collect();
        SurfaceInstance { class_name: "a".into(), instance_id: "a-0".into(), views, incomplete: false }
    }

    #[test]
    fn full_arc_starts_at_zero() {
        let w = sample_view_window(&instance(), "illum0", 9, &mut Rng::new(3)).unwrap();
        let thetas: Vec<i32> = w.iter().map(|(b, _)| b.theta_deg).collect();
        assert_eq!(thetas, BASE_THETAS.to_vec());
        assert!(w.iter().all(|(b, o)| b.delta_deg == 0 && o.delta_deg == OFFSET_DELTA && b.theta_deg == o.theta_deg));
    }

    #[test]
    fn single_view_window() {
        let w = sample_view_window(&instance(), "illum0", 1, &mut Rng::new(3)).unwrap();
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn four_view_starts_are_uniform() {
        let mut rng = Rng::new(11);
        let mut counts = [0usize; 6];
        let draws = 10_000;
        for _ in 0..draws {
            counts[window_start(&[true; 9], 4, &mut rng).unwrap()] += 1;
        }
        let p = 1.0 / 6.0;
        let sigma = libm::sqrt(draws as f64 * p * (1.0 - p));
        for c in counts {
            assert!((c as f64 - draws as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn gaps_restrict_starts() {
        let mut complete = [true; 9];
        complete[4] = false;
        for seed in 0..50 {
            let s = window_start(&complete, 4, &mut Rng::new(seed)).unwrap();
            assert!(s == 0 || s == 5);
        }
        assert!(matches!(window_start(&complete, 5, &mut Rng::new(0)), Err(crate::Error::Sampling(_))));
        let mut inst = instance();
        inst.views.retain(|v| v.theta_deg != 0);
        assert!(sample_view_window(&inst, "illum0", 5, &mut Rng::new(0)).is_err());
        assert!(sample_view_window(&inst, "illum9", 1, &mut Rng::new(0)).is_err());
    }
}
