mod common;
mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treespace::line::project_with_tol;
use treespace::{distance, project, sums_of_squares, SimpleLine};

use common::{random_line, span};

fn nearby_tree(line: &SimpleLine, rng: &mut ChaCha8Rng) -> treespace::Tree {
    let taxa = line.midpoint().taxa().clone();
    if rng.random_bool(0.5) {
        oracle::random_tree(&taxa, rng, 0.3, 0.1, 2.0)
    } else {
        let s = rng.random_range(-span(line)..span(line));
        oracle::rescale(&line.evaluate(s), rng, 0.1, 2.0)
    }
}

#[test]
fn generator_builds_multi_pair_lines() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let lines: Vec<SimpleLine> = (0..40).map(|_| random_line(6, 3, &mut rng)).collect();
    assert!(lines.iter().all(|l| l.validate().is_ok()));
    assert!(lines.iter().any(|l| l.len() == 3));
    assert!(lines.iter().filter(|l| l.len() >= 2).count() > 10);
}

#[test]
fn evaluate_at_zero_is_midpoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let line = random_line(7, 4, &mut rng);
        assert_eq!(&line.evaluate(0.0), line.midpoint());
    }
}

#[test]
fn lines_are_geodesics() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..30 {
        let line = random_line(6, 3, &mut rng);
        let r = span(&line);
        for _ in 0..10 {
            let mut s: Vec<f64> = (0..3).map(|_| rng.random_range(-r..r)).collect();
            s.sort_by(f64::total_cmp);
            let y: Vec<_> = s.iter().map(|&t| line.evaluate(t)).collect();
            let d13 = distance(&y[0], &y[2]).unwrap();
            let d12 = distance(&y[0], &y[1]).unwrap();
            let d23 = distance(&y[1], &y[2]).unwrap();
            assert!(
                (d13 - d12 - d23).abs() <= 1e-8 * r,
                "{d13} vs {d12} + {d23}"
            );
            let speed = line.weight_norm();
            assert!((d13 - (s[2] - s[0]) * speed).abs() <= 1e-8 * r);
        }
    }
}

#[test]
fn topology_changes_by_one_split_at_each_breakpoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..40 {
        let line = random_line(7, 4, &mut rng);
        for (j, pr) in line.pairs().iter().enumerate() {
            let before = line.interval_splits(j);
            let after = line.interval_splits(j + 1);
            let gone: Vec<_> = before.iter().filter(|q| !after.contains(q)).collect();
            let new: Vec<_> = after.iter().filter(|q| !before.contains(q)).collect();
            assert_eq!(gone.len(), 1);
            assert_eq!(new.len(), 1);
            assert!([pr.p, pr.p_prime].contains(gone[0]));
            assert!([pr.p, pr.p_prime].contains(new[0]));
        }
    }
}

#[test]
fn projection_matches_grid_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..40 {
        let line = random_line(6, 3, &mut rng);
        let x = nearby_tree(&line, &mut rng);
        let proj = project(&x, &line).unwrap();
        let d0 = distance(line.midpoint(), &x).unwrap();
        let half = d0 / line.weight_norm() + 1.0;
        let (lo, hi) = (proj.s_star - half.min(3.0), proj.s_star + half.min(3.0));
        let steps = ((hi - lo) / 1e-3) as usize;
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=steps {
            let s = lo + (hi - lo) * k as f64 / steps as f64;
            let d = distance(&x, &line.evaluate(s)).unwrap();
            if d < best.0 {
                best = (d, s);
            }
        }
        assert!(proj.d_perp <= best.0 + 1e-9, "case {case}");
        assert!(
            (best.1 - proj.s_star).abs() < 2e-3,
            "case {case}: grid {} vs {}",
            best.1,
            proj.s_star
        );
        assert!(
            d0 * d0 + 1e-6 * (1.0 + d0 * d0) >= proj.d_perp * proj.d_perp + proj.d_par * proj.d_par,
            "case {case}: d0 {d0} perp {} par {} s {} line {:?} x {:?}",
            proj.d_perp,
            proj.d_par,
            proj.s_star,
            line,
            x
        );
    }
}

#[test]
fn points_on_the_line_project_to_themselves() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..30 {
        let line = random_line(6, 3, &mut rng);
        let s = rng.random_range(-span(&line)..span(&line));
        let proj = project_with_tol(&line.evaluate(s), &line, 1e-10).unwrap();
        assert!(proj.d_perp < 1e-8);
        assert!((proj.s_star - s).abs() < 1e-7);
    }
}

#[test]
fn sums_respect_total_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let line = random_line(6, 3, &mut rng);
        let data: Vec<_> = (0..8).map(|_| nearby_tree(&line, &mut rng)).collect();
        let (par, perp) = sums_of_squares(&line, &data).unwrap();
        let total: f64 = data
            .iter()
            .map(|x| distance(line.midpoint(), x).unwrap().powi(2))
            .sum();
        assert!(par + perp <= total * (1.0 + 1e-6) + 1e-9);
        let on_line: Vec<_> = [-1.0, 0.5, 2.0].iter().map(|&s| line.evaluate(s)).collect();
        assert!(sums_of_squares(&line, &on_line).unwrap().1 < 1e-12);
    }
}

#[test]
fn mirrored_line_runs_backwards() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..40 {
        let line = random_line(7, 4, &mut rng);
        let back = line.mirrored();
        assert!(back.validate().is_ok());
        assert_eq!(back.mirrored(), line);
        for _ in 0..5 {
            let s = rng.random_range(-span(&line)..span(&line));
            assert_eq!(back.evaluate(-s), line.evaluate(s));
        }
    }
}

#[test]
fn canonical_form_traces_the_same_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..40 {
        let line = random_line(7, 4, &mut rng);
        let c = line.canonical();
        assert!(c.validate().is_ok());
        assert!(c.is_canonical());
        assert_eq!(c.mirrored().canonical(), c);
        assert_eq!(c.weight_norm(), line.weight_norm());
        let r = span(&line);
        let probe = r / 2.0;
        let forward = c.evaluate(probe) == line.evaluate(probe);
        for _ in 0..5 {
            let s = rng.random_range(-r..r);
            let t = if forward { s } else { -s };
            assert_eq!(c.evaluate(t), line.evaluate(s));
        }
    }
}
