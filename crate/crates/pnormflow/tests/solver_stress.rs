use pnormflow::{d_p, mincut_dinf, shortest_path_d1, DemandPair, PNormParam, SolveOptions, WeightedGraph};
use rand::{Rng, SeedableRng};

#[test]
fn extreme_exponents_on_random_graphs() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for trial in 0..20 {
        let n = 4 + (trial % 7);
        let mut edges: Vec<(usize, usize, f64)> = Vec::new();
        for v in 1..n {
            let u = rng.gen_range(0..v);
            edges.push((u, v, rng.gen_range(0.1..10.0)));
        }
        for _ in 0..n {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            if u != v {
                edges.push((u.min(v), u.max(v), rng.gen_range(0.1..10.0)));
            }
        }
        let g = WeightedGraph::from_triples(n, &edges).unwrap();
        let d = DemandPair::new(0, n - 1).unwrap();
        let opts = SolveOptions::default();

        // p = 1.01: must bracket d_1 within the monotonicity window.
        let p = PNormParam::new(1.01).unwrap();
        let rep = d_p(&g, d, p, opts).unwrap();
        let d1 = shortest_path_d1(&g, d).unwrap();
        let m = g.m() as f64;
        let lo = d1 / m.powf(1.0 - 1.0 / 1.01);
        assert!(
            rep.value() <= d1 * (1.0 + 1e-8) && rep.value() >= lo * (1.0 - 1e-8),
            "trial {trial}: d_1.01 = {} not in [{lo}, {d1}], gap {}, kkt {}, iters {}",
            rep.value(),
            rep.rel_gap,
            rep.kkt_residual,
            rep.iterations
        );
        // Large p toward the cut: p = 66 ≥ 4 ln(n)/0.25 for n ≤ 10.
        let p = PNormParam::new(66.0).unwrap();
        let rep = d_p(&g, d, p, opts).unwrap();
        let dinf = mincut_dinf(&g, d).unwrap();
        assert!(
            rep.value() >= dinf * (1.0 - 1e-8) && rep.value() <= 1.25 * dinf * (1.0 + 1e-8),
            "trial {trial}: d_66 = {} vs dinf = {dinf}, gap {}, iters {}",
            rep.value(),
            rep.rel_gap,
            rep.iterations
        );

        // Mid p on the same corpus: the certificate gates apply here.
        for pv in [1.25, 1.5, 3.0, 5.0] {
            let rep = d_p(&g, d, PNormParam::new(pv).unwrap(), opts).unwrap();
            assert!(rep.rel_gap <= 1e-8 && rep.rel_gap >= -1e-12, "p {pv} trial {trial}");
            assert!(rep.kkt_residual <= 1e-6, "p {pv} trial {trial} kkt {}", rep.kkt_residual);
        }
    }
}

#[test]
fn primal_route_on_wide_weight_spreads() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for trial in 0..12 {
        let n = 4 + (trial % 6);
        let mut edges: Vec<(usize, usize, f64)> = Vec::new();
        for v in 1..n {
            let u = rng.gen_range(0..v);
            edges.push((u, v, 10f64.powf(rng.gen_range(-3.0..3.0))));
        }
        for _ in 0..n + 2 {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            if u != v {
                edges.push((u.min(v), u.max(v), 10f64.powf(rng.gen_range(-3.0..3.0))));
            }
        }
        // Parallel edge to exercise length-2 cycles in the basis.
        let (a, b, w) = edges[0];
        edges.push((a, b, w * 0.5));
        let g = WeightedGraph::from_triples(n, &edges).unwrap();
        let d = DemandPair::new(0, n - 1).unwrap();
        for pv in [8.0, 12.0, 37.0] {
            let p = PNormParam::new(pv).unwrap();
            let (flow, rep) = pnormflow::solve_primal(&g, d, p, SolveOptions::default())
                .unwrap_or_else(|e| panic!("trial {trial} p {pv}: {e}"));
            assert!(rep.rel_gap <= 1e-8 && rep.rel_gap >= -1e-12, "trial {trial} p {pv}");
            let div = g.divergence(&flow.values).unwrap();
            for (v, &dv) in div.iter().enumerate() {
                let want = if v == 0 {
                    1.0
                } else if v == n - 1 {
                    -1.0
                } else {
                    0.0
                };
                assert!((dv - want).abs() <= 1e-9, "trial {trial} p {pv} v {v}");
            }
            // Sandwich between d_∞ and m^{1/p} d_∞.
            let dinf = mincut_dinf(&g, d).unwrap();
            let cap = (g.m() as f64).powf(1.0 / pv) * dinf;
            assert!(
                rep.value() >= dinf * (1.0 - 1e-7) && rep.value() <= cap * (1.0 + 1e-7),
                "trial {trial} p {pv}: {} not in [{dinf}, {cap}]",
                rep.value()
            );
            // The dual potentials certify through the public cost functions.
            let (phi, rep2) = pnormflow::solve_dual(&g, d, p, SolveOptions::default()).unwrap();
            let dn = pnormflow::dual_cost(&g, &phi, p).unwrap();
            assert!(
                (1.0 / dn - rep2.dual_value).abs() <= 1e-6 * rep2.dual_value.abs(),
                "trial {trial} p {pv}: dual_cost disagrees with report"
            );
        }
    }
}

#[test]
fn unit_cycle_closed_form_at_p_1000() {
    // Unit cycle, adjacent pair, p = 1000: closed form
    // d_p = (1 + (n−1)^{1−q})^{−1/q} with q = p/(p−1).
    let n = 12;
    let edges: Vec<(usize, usize, f64)> =
        (0..n).map(|v| (v, (v + 1) % n, 1.0)).collect();
    let g = WeightedGraph::from_triples(n, &edges).unwrap();
    let p = PNormParam::new(1000.0).unwrap();
    let q = p.q();
    let expect = (1.0 + (n as f64 - 1.0).powf(1.0 - q)).powf(-1.0 / q);
    let d = DemandPair::new(0, 1).unwrap();
    let rep = d_p(&g, d, p, SolveOptions::default()).unwrap();
    assert!(
        (rep.value() - expect).abs() / expect < 1e-9,
        "d_1000 = {} vs {expect}, gap {}, iters {}",
        rep.value(),
        rep.rel_gap,
        rep.iterations
    );
}

#[test]
fn complete_graph_solves_stay_fast() {
    let n = 50usize;
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            edges.push((u, v, 1.0 + ((u * 7 + v * 13) % 10) as f64));
        }
    }
    let g = WeightedGraph::from_triples(n, &edges).unwrap();
    let p = PNormParam::new(3.0).unwrap();
    let start = std::time::Instant::now();
    let mut total = 0.0;
    for t in 1..6 {
        let d = DemandPair::new(0, t * 9).unwrap();
        let rep = pnormflow::d_p(&g, d, p, SolveOptions::default()).unwrap();
        total += rep.value();
        assert!(rep.rel_gap <= 1e-8);
    }
    println!("5 solves on K_50 p=3: {:?} (sum {total})", start.elapsed());
}
