use proptest::prelude::*;
use qkd_sagin::cost_model::{
    channel_cost_link, component_counts_link, component_counts_route, parallel_links, phase_unit_costs, span_count,
    ComponentCounts, CostTable, MediumParams, Phase,
};
use qkd_sagin::topology::Medium;
use qkd_sagin::Rational;

fn q(n: i64) -> Rational {
    Rational::from_integer(n.into())
}

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn unit_k() -> MediumParams<Rational> {
    MediumParams::new(q(160), q(1)).unwrap()
}

#[test]
fn parallel_link_examples() {
    assert_eq!(parallel_links(&q(0), &unit_k()), 0);
    assert_eq!(parallel_links(&q(5), &unit_k()), 5);
    assert_eq!(parallel_links(&r(6, 5), &unit_k()), 2);
}

#[test]
fn span_examples() {
    assert_eq!(span_count(&q(160), &q(160)), 1);
    assert_eq!(span_count(&q(0), &q(160)), 0);
    assert_eq!(span_count(&q(161), &q(160)), 2);
}

#[test]
fn component_examples() {
    let c = component_counts_link(1, &q(160), &unit_k());
    assert_eq!(c, ComponentCounts { tx: 2, rx: 1, lkm: 2, si: 0, md: 1 });
    let c = component_counts_link(2, &q(320), &unit_k());
    assert_eq!(c, ComponentCounts { tx: 8, rx: 4, lkm: 3, si: 1, md: 3 });
    let zero = component_counts_link(0, &q(320), &unit_k());
    assert_eq!((zero.tx, zero.rx), (0, 0));
    assert_eq!((zero.lkm, zero.si, zero.md), (c.lkm, c.si, c.md));
}

#[test]
fn degenerate_span_clamps() {
    let c = component_counts_link(3, &q(0), &unit_k());
    assert_eq!(c, ComponentCounts { tx: 0, rx: 0, lkm: 1, si: 0, md: 0 });
}

#[test]
fn route_examples() {
    let p = unit_k();
    let d = q(160);
    let two = component_counts_route(1, [(&d, &p), (&d, &p)]);
    assert_eq!(two, ComponentCounts { tx: 4, rx: 2, lkm: 4, si: 0, md: 2 });
    assert_eq!(component_counts_route(1, std::iter::empty::<(&Rational, &MediumParams<Rational>)>()), ComponentCounts::default());
    let e = q(480);
    assert_eq!(component_counts_route(2, [(&e, &p)]), component_counts_link(2, &e, &p));
}

#[test]
fn channel_examples() {
    assert_eq!(channel_cost_link(1, &q(100)), q(400));
    assert_eq!(channel_cost_link(0, &q(100)), q(100));
    assert_eq!(channel_cost_link(3, &q(0)), q(0));
}

#[test]
fn fiber_unit_prices() {
    // tau = (2*1500 + 1*2250)/3, lambda = 2*1200 + 0*150 + 1*300
    let fiber = MediumParams::defaults(Medium::Fiber);
    let u = phase_unit_costs(Medium::Fiber, &fiber, &CostTable::default(), &q(160)).unwrap();
    assert_eq!((u.tau.clone(), u.lambda.clone()), (q(1750), q(2700)));
    assert_eq!((u.phi.clone(), u.delta.clone()), (q(1750), q(2700)));
    assert_eq!((u.psi, u.xi), (q(3500), q(5400)));
    assert_eq!((u.ch_r, u.ch_e, u.ch_o), (q(1), q(1), q(2)));
}

#[test]
fn longer_fiber_adds_relay_equipment() {
    // s = 2: tau = (4*1500 + 2*2250)/3, lambda = 3*1200 + 150 + 3*300
    let fiber = MediumParams::defaults(Medium::Fiber);
    let u = phase_unit_costs(Medium::Fiber, &fiber, &CostTable::default(), &q(300)).unwrap();
    assert_eq!(u.tau, q(3500));
    assert_eq!(u.lambda, q(4650));
}

#[test]
fn ondemand_factor_scales_prices() {
    let table = CostTable::with_ondemand_factor(&r(5, 2));
    let res = table.get(Medium::Uav, Phase::Reservation).unwrap();
    let od = table.get(Medium::Uav, Phase::OnDemand).unwrap();
    assert_eq!(od.tx, res.tx.clone() * r(5, 2));
    assert_eq!(od.ch, res.ch.clone() * r(5, 2));
}

#[test]
fn missing_table_entry() {
    let table = CostTable::<Rational>::empty();
    assert!(phase_unit_costs(Medium::Fiber, &MediumParams::defaults(Medium::Fiber), &table, &q(1)).is_err());
}

/// ⌈n/d⌉ for positive d by integer division.
fn ceil_div(n: i64, d: i64) -> u64 {
    ((n + d - 1) / d) as u64
}

proptest! {
    #[test]
    fn closed_forms_match_ceilings(en in 1i64..100_000, ed in 1i64..50, tn in 1i64..5_000, td in 1i64..50, p in 0u64..20) {
        // s = ceil((en/ed) / (tn/td)) = ceil(en*td / (ed*tn))
        let s = ceil_div(en * td, ed * tn);
        let params = MediumParams::new(r(tn, td), q(1)).unwrap();
        let c = component_counts_link(p, &r(en, ed), &params);
        prop_assert_eq!(c, ComponentCounts { tx: 2 * p * s, rx: p * s, lkm: s + 1, si: s - 1, md: 2 * s - 1 });
        prop_assert_eq!(c.tx, 2 * c.rx);
    }

    #[test]
    fn parallel_links_is_monotone(a in 0i64..10_000, b in 0i64..10_000, den in 1i64..20, kn in 1i64..50, kd in 1i64..20) {
        let params = MediumParams::new(q(1), r(kn, kd)).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(parallel_links(&r(lo, den), &params) <= parallel_links(&r(hi, den), &params));
    }

    #[test]
    fn whole_multiples_of_capacity(n in 0u64..1000, kn in 1i64..50, kd in 1i64..20) {
        let k = r(kn, kd);
        let params = MediumParams::new(q(1), k.clone()).unwrap();
        prop_assert_eq!(parallel_links(&(q(n as i64) * k), &params), n);
    }

    #[test]
    fn ondemand_never_cheaper(m in 0usize..3, en in 1i64..1_000_000, ed in 1i64..100) {
        let medium = Medium::ALL[m];
        let u = phase_unit_costs(medium, &MediumParams::defaults(medium), &CostTable::default(), &r(en, ed)).unwrap();
        prop_assert!(u.psi >= u.phi);
        prop_assert!(u.xi >= u.delta);
        prop_assert!(u.ch_o >= u.ch_e);
    }
}
