use absorbing_mdp::absorption::value_iterate;
use absorbing_mdp::mdp::{MdpModel, Strategy as Policy};
use absorbing_mdp::measure::{
    integrate, pushforward_affine, ActionAtom, ActionMeasure, AffineEmbedding, Component, Density, HybridMeasure,
    MeasureKind, StatePart, DEFAULT_TOL,
};
use absorbing_mdp::number::{rat, rat_int, Number};
use absorbing_mdp::occupation::{expected_time_by_survival, flow_equation, occupation, Solver, Truncation};
use absorbing_mdp::spaces::StatePoint;
use absorbing_mdp::topology::{check_convergence, modes_consistent, Mode};
use absorbing_mdp::zoo::{self, ZooEntry};
use num_rational::BigRational;
use proptest::prelude::*;
use proptest::sample::subsequence;

fn entry(name: &str) -> ZooEntry {
    zoo::by_name(name).unwrap()
}

fn ratio() -> impl Strategy<Value = BigRational> {
    (0i64..=64, 1i64..=64).prop_map(|(p, q)| rat(p, q))
}

fn unit() -> impl Strategy<Value = BigRational> {
    (0i64..=64).prop_map(|p| rat(p, 64))
}

fn rung(n: usize) -> String {
    format!("b_{n}")
}

/// Random nonnegative atomic state-action measure on the ladder model.
fn ladder_measure() -> impl Strategy<Value = Vec<(usize, usize, BigRational)>> {
    prop::collection::vec((0usize..=20, 1usize..=3, ratio()), 0..8)
}

fn build_ladder(m: &MdpModel, cells: &[(usize, usize, BigRational)]) -> HybridMeasure {
    let mut mu = HybridMeasure::zero(m.name.clone(), MeasureKind::StateAction);
    for (n, a, w) in cells {
        let name = if *n == 0 { "1".to_string() } else { rung(*n) };
        mu.push(Component {
            state: StatePart::atom(&m.states, &name).unwrap(),
            action: Some(ActionMeasure::named(a.to_string())),
            weight: Number::from(w.clone()),
        })
        .unwrap();
    }
    mu
}

/// Random piecewise-constant state-action measure on the selector segment.
fn segment_measure() -> impl Strategy<Value = Vec<(Vec<BigRational>, Vec<BigRational>, bool)>> {
    let piece = (prop::collection::btree_set(1i64..64, 0..4), prop::collection::vec(ratio(), 4), any::<bool>())
        .prop_map(|(cuts, hs, which)| {
            let breaks: Vec<BigRational> =
                std::iter::once(rat_int(0)).chain(cuts.into_iter().map(|c| rat(c, 64))).chain([rat_int(1)]).collect();
            let heights = hs[..breaks.len() - 1].to_vec();
            (breaks, heights, which)
        });
    prop::collection::vec(piece, 0..4)
}

fn build_segment(m: &MdpModel, parts: &[(Vec<BigRational>, Vec<BigRational>, bool)]) -> HybridMeasure {
    let mut mu = HybridMeasure::zero(m.name.clone(), MeasureKind::StateAction);
    for (breaks, heights, which) in parts {
        let d = Density::new(breaks.clone(), heights.iter().cloned().map(Number::from).collect()).unwrap();
        mu.push(Component {
            state: StatePart::Density { segment: "y".into(), density: d },
            action: Some(ActionMeasure::named(if *which { "1" } else { "0" })),
            weight: Number::one(),
        })
        .unwrap();
    }
    mu
}

fn exact_integral(mu: &HybridMeasure, g: &absorbing_mdp::measure::TestFunction) -> Number {
    let i = integrate(mu, g, DEFAULT_TOL).unwrap();
    assert!(i.is_exact(), "{} should integrate exactly", g.name());
    i.value
}

/// Deterministic ladder strategy: actions 2 or 3 below `top`, action 1 from
/// `top` upward.
fn ladder_strategy(m: &MdpModel, top: usize, below: &[bool]) -> Policy {
    let below = below.to_vec();
    Policy::deterministic_stationary(m, format!("det-{top}"), move |s| {
        Some(match s.strip_prefix("b_").and_then(|n| n.parse::<usize>().ok()) {
            Some(n) if n < top => if below[n % below.len()] { "2" } else { "3" }.to_string(),
            Some(_) => "1".to_string(),
            None => "3".to_string(),
        })
    })
    .unwrap()
    .with_cap(Number::from(rat_int(1i64 << top.min(60))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rational_numbers_round_trip_through_text(p in -1000i64..1000, q in 1i64..1000) {
        let x = Number::ratio(p, q);
        prop_assert_eq!(x.to_string().parse::<Number>().unwrap(), x.clone());
        let json = serde_json::to_string(&x).unwrap();
        prop_assert_eq!(serde_json::from_str::<Number>(&json).unwrap(), x);
    }

    #[test]
    fn exact_arithmetic_is_a_field(a in ratio(), b in (1i64..=64, 1i64..=64).prop_map(|(p, q)| rat(p, q))) {
        let (a, b) = (Number::from(a), Number::from(b));
        prop_assert_eq!(&(&a + &b) - &b, a.clone());
        prop_assert_eq!((&a * &b).checked_div(&b).unwrap(), a);
    }

    #[test]
    fn atomic_integrals_are_additive_and_linear(x in ladder_measure(), y in ladder_measure(), c in ratio()) {
        let e = entry("example2");
        let (mu, nu) = (build_ladder(&e.model, &x), build_ladder(&e.model, &y));
        let c = Number::from(c);
        let sum = mu.add(&nu).unwrap();
        let scaled = mu.scale(&c).unwrap();
        for g in e.battery("WS-STEP").unwrap().functions() {
            let (im, inu) = (exact_integral(&mu, g), exact_integral(&nu, g));
            prop_assert_eq!(exact_integral(&sum, g), &im + &inu);
            prop_assert_eq!(exact_integral(&scaled, g), &c * &im);
        }
        prop_assert_eq!(sum.total_mass(), &mu.total_mass() + &nu.total_mass());
    }

    #[test]
    fn segment_integrals_are_additive(x in segment_measure(), y in segment_measure()) {
        let e = entry("remark1");
        let (mu, nu) = (build_segment(&e.model, &x), build_segment(&e.model, &y));
        let sum = mu.add(&nu).unwrap();
        for g in e.battery("WS-STEP").unwrap().functions() {
            prop_assert_eq!(exact_integral(&sum, g), &exact_integral(&mu, g) + &exact_integral(&nu, g));
        }
    }

    #[test]
    fn marginal_keeps_mass(x in ladder_measure(), y in segment_measure()) {
        let lad = entry("example2");
        let mu = build_ladder(&lad.model, &x);
        let marg = mu.marginal_state();
        prop_assert_eq!(marg.kind, MeasureKind::State);
        prop_assert_eq!(marg.total_mass(), mu.total_mass());
        let atoms: Vec<Number> = lad.model.states.atoms().iter().map(|a| marg.mass_on_atom(&a.name)).collect();
        prop_assert_eq!(Number::sum(atoms.iter()), mu.total_mass());

        let sel = entry("remark1");
        let nu = build_segment(&sel.model, &y);
        prop_assert_eq!(nu.marginal_state().mass_on_segment("y"), nu.total_mass());
    }

    #[test]
    fn pushforward_preserves_mass(
        points in prop::collection::vec((unit(), ratio()), 0..5),
        density in prop::option::of((1i64..64, ratio())),
    ) {
        let e = entry("example1");
        let atoms = points.into_iter().map(|(x, w)| (ActionAtom::At(x), Number::from(w))).collect();
        let density = density.map(|(cut, h)| {
            Density::new(vec![rat_int(0), rat(cut, 64), rat_int(1)], vec![Number::from(h), Number::ratio(1, 2)]).unwrap()
        });
        let nu = ActionMeasure::mixture(atoms, density);
        let image = pushforward_affine(&e.model.name, &nu, &AffineEmbedding::identity_into("1"), &e.model.states).unwrap();
        prop_assert_eq!(image.total_mass(), nu.mass());
        let onto = pushforward_affine(&e.model.name, &nu, &AffineEmbedding::onto_atom("cemetery"), &e.model.states).unwrap();
        prop_assert_eq!(onto.mass_on_atom("cemetery"), nu.mass());
    }

    #[test]
    fn flow_identity_and_survival_sum(top in 3usize..=30, below in prop::collection::vec(any::<bool>(), 1..6)) {
        let e = entry("example2");
        let pi = ladder_strategy(&e.model, top, &below);
        let x0 = StatePoint::atom("b_1");
        let occ = occupation(&e.model, &pi, &x0, &Solver::Countable(Truncation::default())).unwrap();
        prop_assert!(occ.tail_bound.is_zero());
        for c in flow_equation(&e.model, &occ, &x0).unwrap() {
            prop_assert!(c.holds(), "flow at {}: {} vs {}", c.cell, c.occupation, c.inflow);
        }
        prop_assert_eq!(expected_time_by_survival(&e.model, &pi, &x0, 4096).unwrap(), occ.total_mass());
        prop_assert_eq!(occ.total_mass(), occ.marginal().total_mass());
    }

    #[test]
    fn value_iteration_is_monotone(depth in 1usize..=24, iters in 1usize..=80) {
        let e = entry("example2");
        let support: Vec<String> = (1..=depth).map(rung).chain(["1".to_string()]).collect();
        let vi = value_iterate(&e.model, &support, iters).unwrap();
        prop_assert!(vi.monotone);
        prop_assert_eq!(vi.iterations, iters);
        for g in vi.gaps.values() {
            prop_assert!(!g.is_negative());
        }
    }

    #[test]
    fn ws_convergence_implies_w_convergence(picks in subsequence((0usize..48).collect::<Vec<_>>(), 3..20)) {
        let e = entry("example1");
        let d = &e.datasets[0];
        let (seq, limit) = e.dataset_measures(d).unwrap();
        let sub: Vec<_> = picks.iter().map(|&i| seq[i].clone()).collect();
        let w = check_convergence(&sub, &limit, e.battery_for(Mode::W).unwrap(), d.tol).unwrap();
        let ws = check_convergence(&sub, &limit, e.battery_for(Mode::Ws).unwrap(), d.tol).unwrap();
        prop_assert!(modes_consistent(&w, &ws));
        prop_assert!(!ws.converges());
    }

    #[test]
    fn family_members_round_trip_through_json(n in 3u64..=50) {
        let e = entry("example2");
        let pi = e.family("Lambda").unwrap().generate(n).unwrap();
        let back: Policy = serde_json::from_str(&serde_json::to_string(&pi).unwrap()).unwrap();
        prop_assert_eq!(back, pi);
    }

    #[test]
    fn state_points_round_trip(n in 1usize..=65, p in unit()) {
        let a = StatePoint::atom(rung(n));
        prop_assert_eq!(a.to_string().parse::<StatePoint>().unwrap(), a);
        let s = StatePoint::point("1", p);
        prop_assert_eq!(s.to_string().parse::<StatePoint>().unwrap(), s);
    }
}

#[test]
fn zoo_models_round_trip_through_json() {
    for e in zoo::all().unwrap() {
        let back = MdpModel::from_json(&e.model.to_json().unwrap()).unwrap();
        assert_eq!(back, e.model, "{}", e.name);
    }
}

#[test]
fn measures_round_trip_through_json() {
    let e = entry("example1");
    let mu = e.occupation_of(&e.strategy("pi^inf").unwrap(), &e.x0).unwrap();
    let back: HybridMeasure = serde_json::from_str(&serde_json::to_string(&mu).unwrap()).unwrap();
    assert_eq!(back, mu);
}
