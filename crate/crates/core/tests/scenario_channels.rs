use irs_wpcn::channel::{align_phases, combined_amplitude, effective_gain, PhaseVector};
use irs_wpcn::scenario::{distance, generate_scenario, pathloss, SystemConfig};
use num_complex::Complex64;

fn tiny(seed: u64) -> SystemConfig {
    let mut cfg = SystemConfig::desk();
    cfg.num_elements = 2;
    cfg.num_devices = 1;
    cfg.device_positions = Some(vec![[9.0, 1.0, 0.0]]);
    cfg.seed = seed;
    cfg
}

#[test]
fn fading_power_matches_pathloss_on_average() {
    let cfg = tiny(0);
    let pos = [9.0, 1.0, 0.0];
    let pl_hi = pathloss(distance(&cfg.hap_pos, &cfg.irs_pos), cfg.pathloss_exp_hap_irs, cfg.ref_loss_db).unwrap();
    let pl_id = pathloss(distance(&cfg.irs_pos, &pos), cfg.pathloss_exp_irs_device, cfg.ref_loss_db).unwrap();
    let pl_hd = pathloss(distance(&cfg.hap_pos, &pos), cfg.pathloss_exp_hap_device, cfg.ref_loss_db).unwrap();
    let draws = 10_000;
    let (mut g, mut h, mut d) = (0.0, 0.0, 0.0);
    for seed in 0..draws {
        let s = generate_scenario(&tiny(seed)).unwrap();
        g += s.g.iter().map(|z| z.norm_sqr()).sum::<f64>() / 2.0;
        h += s.h_r[0].iter().map(|z| z.norm_sqr()).sum::<f64>() / 2.0;
        d += s.direct[0].norm_sqr();
    }
    let n = draws as f64;
    for (mean, pl) in [(g / n, pl_hi), (h / n, pl_id), (d / n, pl_hd)] {
        assert!((mean / pl - 1.0).abs() < 0.05, "{mean} vs {pl}");
    }
}

#[test]
fn cascaded_rows_reproduce_the_reflected_sum() {
    let s = generate_scenario(&SystemConfig::desk()).unwrap();
    let angles: Vec<f64> = (0..s.num_elements()).map(|i| 0.37 * i as f64).collect();
    let v = PhaseVector::from_angles(&angles);
    for k in 0..s.num_devices() {
        // h_r^H diag(v) g + direct, written out directly.
        let mut reference = s.direct[k];
        for n in 0..s.num_elements() {
            reference += s.h_r[k][n].conj() * v.entries()[n] * s.g[n];
        }
        let amp = combined_amplitude(s.direct[k], &s.cascaded[k], v.entries());
        assert!((amp - reference).norm() <= 1e-12 * reference.norm().max(1e-300));
        let gain = effective_gain(s.direct[k], &s.cascaded[k], &v).unwrap();
        assert!((gain - reference.norm_sqr()).abs() <= 1e-12 * reference.norm_sqr());
    }
}

#[test]
fn aligned_gain_is_the_triangle_bound() {
    let s = generate_scenario(&SystemConfig::desk()).unwrap();
    for k in 0..s.num_devices() {
        let (v, gamma) = align_phases(s.direct[k], &s.cascaded[k]);
        let bound = s.direct[k].norm() + s.cascaded[k].iter().map(|z| z.norm()).sum::<f64>();
        assert!((gamma - bound * bound).abs() <= 1e-12 * bound * bound);
        let got = effective_gain(s.direct[k], &s.cascaded[k], &v).unwrap();
        assert!((got - gamma).abs() <= 1e-12 * gamma);
        for z in v.entries() {
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn augmented_and_bare_forms_agree() {
    let s = generate_scenario(&SystemConfig::desk()).unwrap();
    let angles: Vec<f64> = (0..s.num_elements()).map(|i| (i * i) as f64).collect();
    let v = PhaseVector::from_angles(&angles);
    let a = v.to_augmented();
    for k in 0..s.num_devices() {
        let row = s.augmented_row(k);
        let amp: Complex64 = row.iter().zip(a.entries()).map(|(r, z)| r * z).sum();
        let bare = effective_gain(s.direct[k], &s.cascaded[k], &v).unwrap();
        let aug = effective_gain(s.direct[k], &s.cascaded[k], &a).unwrap();
        assert!((amp.norm_sqr() - bare).abs() <= 1e-12 * bare);
        assert!((aug - bare).abs() <= 1e-12 * bare);
    }
}
