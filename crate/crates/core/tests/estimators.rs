use hittime::estimate::{closed_form, volume_sum, Direction};
use hittime::families::{generate, FamilyParams};

fn families() -> Vec<(&'static str, Vec<FamilyParams>)> {
    let torus = |sides: Vec<usize>| FamilyParams::Torus { sides };
    vec![
        ("torus3", (4..=16).step_by(2).map(|n| torus(vec![n, n, n])).collect()),
        ("torus2", [8, 16, 32, 64].iter().map(|&n| torus(vec![n, n])).collect()),
        ("torus1", [8, 16, 32, 64, 128].iter().map(|&n| torus(vec![1, 1, n])).collect()),
        ("torus_rect", (3..=10).map(|b| torus(vec![1, b, b * b])).collect()),
        ("sierpinski", (2..=6).map(|k| FamilyParams::Sierpinski { k }).collect()),
        ("vicsek", (1..=4).map(|k| FamilyParams::Vicsek { k }).collect()),
        ("trace2d_half", [20, 40, 80, 160].iter().map(|&n| FamilyParams::Trace2d { alpha: 0.5, n }).collect()),
        ("trace2d_one", [20, 40, 80, 140].iter().map(|&n| FamilyParams::Trace2d { alpha: 1.0, n }).collect()),
        ("trace3d_quarter", [20, 40, 80, 160].iter().map(|&n| FamilyParams::Trace3d { alpha: 0.25, beta: 0.0, n }).collect()),
        ("trace3d_half", [20, 40, 80].iter().map(|&n| FamilyParams::Trace3d { alpha: 0.5, beta: 0.5, n }).collect()),
        ("trace3d_three_quarter", [10, 20, 30, 40].iter().map(|&n| FamilyParams::Trace3d { alpha: 0.75, beta: 0.0, n }).collect()),
        ("birth_death_0", [16, 64, 256].iter().map(|&n| FamilyParams::BirthDeath { alpha: 0.0, n }).collect()),
        ("birth_death_1", [16, 64, 256].iter().map(|&n| FamilyParams::BirthDeath { alpha: 1.0, n }).collect()),
        ("birth_death_2", [16, 64, 256].iter().map(|&n| FamilyParams::BirthDeath { alpha: 2.0, n }).collect()),
        ("heisenberg", [4, 8, 12, 16].iter().map(|&n| FamilyParams::Heisenberg { n }).collect()),
    ]
}

/// Trace graphs hit from the far end toward the apex, where the volume sum
/// carries a size-independent factor above the bare closed form.
fn toward_apex(params: &FamilyParams, dir: Direction) -> bool {
    matches!(params, FamilyParams::Trace2d { .. } | FamilyParams::Trace3d { .. }) && dir == Direction::FarToOrigin
}

#[test]
fn closed_forms_track_volume_sums() {
    let bound = 8f64.ln();
    let mut failures = Vec::new();
    for (name, grid) in families() {
        let mut apex_gaps = Vec::new();
        for params in &grid {
            let fam = generate(params).unwrap();
            let d = fam.spec.diameter.hops;
            for (dir, target) in [(Direction::OriginToFar, fam.far()), (Direction::FarToOrigin, fam.origin())] {
                let vsum = volume_sum(&fam.kernel.metric_profile(target).unwrap(), fam.spec.theta, d).unwrap();
                let cf = closed_form(params, dir, d).unwrap();
                let gap = (vsum / cf).ln();
                if toward_apex(params, dir) {
                    apex_gaps.push(gap);
                } else if gap.abs() > bound {
                    failures.push(format!("{name} {} {dir:?}: {gap:.3}", params.describe()));
                }
            }
        }
        if !apex_gaps.is_empty() {
            let lo = apex_gaps.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = apex_gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo > bound || lo < -bound {
                failures.push(format!("{name} toward apex: log-gaps in [{lo:.3}, {hi:.3}]"));
            }
        }
    }
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn resistance_estimate_follows_the_heavier_endpoint() {
    use hittime::estimate::{resistance_estimate, EstimateReport};
    use hittime::exact::effective_resistance;
    let mut ratios = Vec::new();
    for n in [16, 32, 64, 128] {
        let fam = generate(&FamilyParams::BirthDeath { alpha: 2.0, n }).unwrap();
        let d = fam.spec.diameter.hops;
        let at_o = EstimateReport::new(&fam.kernel, fam.origin(), 2.0, d).unwrap();
        let at_p = EstimateReport::new(&fam.kernel, fam.far(), 2.0, d).unwrap();
        let est = resistance_estimate(&at_o, &at_p).unwrap();
        assert_eq!(est, at_o.volume_sum);
        assert!(at_o.volume_sum > at_p.volume_sum);
        // Commute time equals R times the total conductance, which is 1 here.
        let commute = effective_resistance(&fam.kernel, fam.origin(), fam.far()).unwrap();
        ratios.push(commute / est);
        let n3 = (n as f64).powi(3);
        assert!((est / n3).ln().abs() < 8f64.ln());
    }
    let spread = ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread < 2.0, "{ratios:?}");
}

#[test]
fn sweep_reruns_are_byte_identical() {
    use hittime::experiment::{run_sweep, strip_comments, sweep_csv, SweepConfig};
    let mut config = SweepConfig::new(
        "rerun",
        vec![
            FamilyParams::Torus { sides: vec![6, 6] },
            FamilyParams::Sierpinski { k: 3 },
            FamilyParams::BirthDeath { alpha: 1.0, n: 20 },
        ],
    );
    config.seed = 99;
    config.quantities.monte_carlo = true;
    config.quantities.trel = true;
    config.mc_trials = 500;
    let a = sweep_csv(&run_sweep(&config).unwrap()).unwrap();
    let b = sweep_csv(&run_sweep(&config).unwrap()).unwrap();
    assert_eq!(strip_comments(&a), strip_comments(&b));
    config.seed = 100;
    let c = sweep_csv(&run_sweep(&config).unwrap()).unwrap();
    assert_ne!(strip_comments(&a), strip_comments(&c));
}

#[test]
fn sweep_rows_respect_the_ratio_window() {
    use hittime::experiment::{run_sweep, SweepConfig};
    let grid: Vec<FamilyParams> = families().into_iter().flat_map(|(_, g)| g.into_iter().take(2)).collect();
    let result = run_sweep(&SweepConfig::new("window", grid)).unwrap();
    assert_eq!(result.failures, 0);
    for row in &result.rows {
        let r = row.ratio.unwrap();
        assert!((1.0 / 64.0..=64.0).contains(&r), "{} {}: {r}", row.family, row.params);
        assert!(row.method.is_some() && row.residual.is_some());
    }
}
