use proptest::prelude::*;
use tcsearch_core::scenario::{
    build_graph, damage_probability_at, generate_scenario, CombineRule, GenerativeParams, Poi, PoiClass, Scenario,
    Susceptibility, WindPocket,
};
use tcsearch_core::Point;

fn class() -> impl Strategy<Value = PoiClass> {
    prop_oneof![Just(PoiClass::Forest), Just(PoiClass::Field), Just(PoiClass::Building)]
}

fn rule() -> impl Strategy<Value = CombineRule> {
    prop_oneof![Just(CombineRule::NoisyOr), Just(CombineRule::Max)]
}

fn pockets() -> impl Strategy<Value = Vec<WindPocket>> {
    prop::collection::vec((-500.0..500.0f64, -500.0..500.0f64), 0..4)
        .prop_map(|v| v.into_iter().map(|(x, y)| WindPocket { position: Point::new(x, y) }).collect())
}

proptest! {
    #[test]
    fn probability_is_bounded(
        c in class(), x in -600.0..600.0f64, y in -600.0..600.0f64, ps in pockets(),
        sigma in 1.0..300.0f64, s in 0.0..=1.0f64, r in rule(),
    ) {
        let susc = Susceptibility::uniform(s);
        let p = damage_probability_at(c, Point::new(x, y), &ps, sigma, &susc, r);
        // independent causes can push noisy-or past a single cause's ceiling
        let ceiling = match r {
            CombineRule::Max => susc.max(),
            CombineRule::NoisyOr => 1.0 - (1.0 - susc.max()).powi(ps.len() as i32),
        };
        prop_assert!(p >= 0.0 && p <= ceiling + 1e-15 && p <= 1.0, "{} > {}", p, ceiling);
    }

    #[test]
    fn probability_falls_with_distance(
        c in class(), px in -300.0..300.0f64, py in -300.0..300.0f64,
        d1 in 0.0..400.0f64, extra in 0.0..400.0f64, angle in 0.0..6.3f64,
        sigma in 5.0..200.0f64, r in rule(),
    ) {
        let pocket = [WindPocket { position: Point::new(px, py) }];
        let at = |d: f64| Point::new(px + d * angle.cos(), py + d * angle.sin());
        let susc = Susceptibility::default();
        let near = damage_probability_at(c, at(d1), &pocket, sigma, &susc, r);
        let far = damage_probability_at(c, at(d1 + extra), &pocket, sigma, &susc, r);
        prop_assert!(far <= near + 1e-15);
    }

    #[test]
    fn probability_rises_with_susceptibility(
        c in class(), x in -500.0..500.0f64, y in -500.0..500.0f64, ps in pockets(),
        s1 in 0.0..=1.0f64, s2 in 0.0..=1.0f64, r in rule(),
    ) {
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        let pos = Point::new(x, y);
        let a = damage_probability_at(c, pos, &ps, 60.0, &Susceptibility::uniform(lo), r);
        let b = damage_probability_at(c, pos, &ps, 60.0, &Susceptibility::uniform(hi), r);
        prop_assert!(a <= b + 1e-15);
    }

    #[test]
    fn generation_is_deterministic_and_in_bounds(seed in any::<u64>(), n in 0usize..40) {
        let params = GenerativeParams::default();
        let a = generate_scenario(seed, n, &params).unwrap();
        let b = generate_scenario(seed, n, &params).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.pois.len(), n);
        prop_assert_eq!(a.wind_pockets.len(), params.n_wind_pockets);
        prop_assert!(a.validate().is_ok());
    }

    #[test]
    fn graph_edges_are_symmetric(seed in any::<u64>(), n in 0usize..30) {
        let s = generate_scenario(seed, n, &GenerativeParams::default()).unwrap();
        let g = build_graph(&s);
        prop_assert_eq!(g.nodes.len(), n + s.wind_pockets.len());
        for e in &g.edges {
            prop_assert!((0.0..=1.0).contains(&e.w));
            if e.src == e.dst {
                prop_assert_eq!(e.w, 1.0);
            } else {
                let back = g.edges.iter().find(|b| b.src == e.dst && b.dst == e.src);
                prop_assert!(back.is_some_and(|b| b.w == e.w));
            }
        }
        let self_loops = g.edges.iter().filter(|e| e.src == e.dst).count();
        prop_assert_eq!(self_loops, g.nodes.len());
    }
}

#[test]
fn damage_frequency_converges() {
    let params = GenerativeParams::default();
    let positions = [(20.0, 10.0), (60.0, 0.0), (0.0, 90.0)];
    let pois: Vec<Poi> = positions
        .iter()
        .zip(PoiClass::ALL)
        .enumerate()
        .map(|(i, (&(x, y), class))| Poi { id: i as u32, position: Point::new(x, y), class, inspect_time: 30.0, damaged: false })
        .collect();
    let mut scenario = Scenario {
        pois,
        wind_pockets: vec![WindPocket { position: Point::ORIGIN }, WindPocket { position: Point::new(100.0, 50.0) }],
        start_position: Point::ORIGIN,
        params: params.clone(),
        seed: 0,
    };
    const N: u64 = 10_000;
    let mut hits = [0u64; 3];
    for draw in 0..N {
        scenario.resample_damage(draw);
        for (h, p) in hits.iter_mut().zip(&scenario.pois) {
            *h += p.damaged as u64;
        }
    }
    for (h, poi) in hits.iter().zip(&scenario.pois) {
        let p = tcsearch_core::scenario::damage_probability(poi, &scenario.wind_pockets, &params);
        let sd = (p * (1.0 - p) / N as f64).sqrt();
        let freq = *h as f64 / N as f64;
        assert!((freq - p).abs() <= 3.0 * sd, "PoI {}: {freq} vs {p} (3 sd = {})", poi.id, 3.0 * sd);
    }
}
