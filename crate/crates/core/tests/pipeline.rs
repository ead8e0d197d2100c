use hyperlabel::correspondence::{residual, MapSpec, CATALOG};
use hyperlabel::dcn::FaceMode;
use hyperlabel::degree::{boundary_degree_2d, completely_labeled_cells, grid_boundary_cycle, inward_corner_degree};
use hyperlabel::geometry::{GridSpec, Region};
use hyperlabel::solver::{filter_spurious, scan, Candidate, CandidateKind, Filter, SolveStatus};
use hyperlabel::{label_grid, solve, Correspondence, LabelConfig, SolverConfig};
use proptest::prelude::*;

fn specs() -> Vec<MapSpec> {
    let mut v: Vec<MapSpec> = CATALOG.iter().map(|n| MapSpec::catalog(n).unwrap()).collect();
    v.push(MapSpec::matching_pennies());
    v.push(MapSpec::coordination());
    v
}

/// Smallest residual over a `k`-times finer lattice inside `region`.
fn brute_min_residual(f: &Correspondence, region: &Region, k: usize) -> f64 {
    let d = region.dim();
    let mut best = f64::INFINITY;
    let mut idx = vec![0usize; d];
    loop {
        let z: Vec<f64> = (0..d)
            .map(|j| region.lo[j] + (region.hi[j] - region.lo[j]) * idx[j] as f64 / k as f64)
            .collect();
        best = best.min(residual(&z, &f.evaluate(&z).unwrap()));
        let mut j = 0;
        while j < d {
            idx[j] += 1;
            if idx[j] <= k {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
        if j == d {
            return best;
        }
    }
}

#[test]
fn reports_are_sound() {
    for spec in specs() {
        for (res, mode) in [(8, FaceMode::Equality), (9, FaceMode::Subcube), (7, FaceMode::Equality)] {
            let cfg = SolverConfig {
                initial_resolution: res,
                face_mode: mode,
                max_depth: 6,
                ..SolverConfig::default()
            };
            let rep = solve(&spec, &cfg).unwrap();
            let f = Correspondence::from_spec(&spec).unwrap();
            let again = residual(&rep.point, &f.evaluate(&rep.point).unwrap());
            assert_eq!(again, rep.residual);
            if rep.status == SolveStatus::FixedPointFound {
                assert!(again <= cfg.tolerance);
            }
            assert!(spec.domain.contains(&rep.point, 0.0));
            for w in rep.depth_trace.windows(2) {
                assert!(w[1].best_residual <= w[0].best_residual);
            }
            assert_eq!(rep.face_mode, mode);
        }
    }
}

#[test]
fn filtered_cells_hold_no_fixed_point() {
    let cfg = SolverConfig {
        filter: Filter::PiecewiseExact,
        ..SolverConfig::default()
    };
    for spec in specs() {
        let f = Correspondence::from_spec(&spec).unwrap();
        for n in [8, 16, 32] {
            let grid = GridSpec::new(spec.domain.clone(), n).unwrap();
            let mut all: Vec<Candidate> = grid
                .cells()
                .map(|cell| {
                    let location = grid.cell_region(&cell).unwrap();
                    Candidate {
                        kind: CandidateKind::CompleteCell,
                        witness: location.center(),
                        location,
                        residual: 0.0,
                        depth: 0,
                        resolution: n,
                        cell_width: vec![0.0; grid.dim()],
                        spurious: None,
                    }
                })
                .collect();
            filter_spurious(&mut all, &f);
            for c in all.iter().filter(|c| !c.is_live()) {
                let min = brute_min_residual(&f, &c.location, 10);
                assert!(min > cfg.tolerance, "{:?} filtered with residual {min}", c.location);
            }
        }
    }
}

#[test]
fn csv_recount_matches_scan() {
    for spec in specs() {
        let f = Correspondence::from_spec(&spec).unwrap();
        let grid = GridSpec::new(spec.domain.clone(), 9).unwrap();
        let gl = label_grid(&grid, &f, &LabelConfig::default()).unwrap();
        let mut buf = Vec::new();
        gl.write_csv(&mut buf).unwrap();
        let d = grid.dim();
        let mut rdr = csv::Reader::from_reader(buf.as_slice());
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), grid.num_vertices());
        // Offline recount straight from the text columns.
        let key = |r: &csv::StringRecord| -> Option<String> {
            (&r[3 * d] == "0").then(|| (0..d).map(|j| r[2 * d + j].to_string()).collect::<Vec<_>>().join(" "))
        };
        let mut count = 0;
        for cell in grid.cells() {
            let keys: Option<Vec<String>> = grid
                .cell_vertex_indices(&cell)
                .unwrap()
                .iter()
                .map(|&i| key(&rows[i]))
                .collect();
            if let Some(mut keys) = keys {
                keys.sort();
                keys.dedup();
                if keys.len() == 1 << d {
                    count += 1;
                }
            }
        }
        let cfg = SolverConfig::default();
        let from_scan = scan(&gl, &f, &cfg)
            .unwrap()
            .iter()
            .filter(|c| c.kind == CandidateKind::CompleteCell)
            .count();
        assert_eq!(count, from_scan);
        assert_eq!(count, completely_labeled_cells(&gl).unwrap().len());
    }
}

#[test]
fn planar_boundaries_wind_once() {
    for spec in specs().into_iter().filter(|s| s.dimension == 2) {
        let f = Correspondence::from_spec(&spec).unwrap();
        for n in [8, 16, 32] {
            let grid = GridSpec::new(spec.domain.clone(), n).unwrap();
            let gl = label_grid(&grid, &f, &LabelConfig::default()).unwrap();
            if gl.fixed_hits().count() > 0 {
                continue;
            }
            let cycle = grid_boundary_cycle(&gl).unwrap();
            let deg = boundary_degree_2d(&cycle, 4).unwrap();
            assert_eq!(deg.degree, inward_corner_degree(2), "{}", spec.to_json().unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn complete_cells_carry_distinct_labels(
        cx in -0.9f64..0.9, cy in -0.9f64..0.9, factor in 0.0f64..0.95, n in 2usize..12
    ) {
        let spec = MapSpec::builtin(
            "contraction",
            hyperlabel::BoxDomain::cube(2, -1.0, 1.0).unwrap(),
            serde_json::json!({"factor": factor, "offset": [cx * (1.0 - factor), cy * (1.0 - factor)]}),
        ).unwrap();
        let f = Correspondence::from_spec(&spec).unwrap();
        let grid = GridSpec::new(spec.domain.clone(), n).unwrap();
        let gl = label_grid(&grid, &f, &LabelConfig::default()).unwrap();
        for cell in completely_labeled_cells(&gl).unwrap() {
            let mut labels: Vec<_> = grid.cell_vertex_indices(&cell).unwrap()
                .iter().map(|&i| gl.label(i).unwrap().label().unwrap()).collect();
            labels.sort();
            labels.dedup();
            prop_assert_eq!(labels.len(), 4);
            // The fixed point (cx, cy) lies in or next to every such cell.
            let r = grid.cell_region(&cell).unwrap();
            let h = grid.cell_diameter();
            prop_assert!(r.contains(&[cx, cy], h));
        }
    }

    #[test]
    fn solve_is_deterministic(res in 2usize..12, mode in prop::bool::ANY) {
        let cfg = SolverConfig {
            initial_resolution: res,
            max_depth: 4,
            face_mode: if mode { FaceMode::Equality } else { FaceMode::Subcube },
            ..SolverConfig::default()
        };
        let spec = MapSpec::catalog("contraction").unwrap();
        prop_assert_eq!(solve(&spec, &cfg).unwrap().to_json(), solve(&spec, &cfg).unwrap().to_json());
    }
}
