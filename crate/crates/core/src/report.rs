//! Line-oriented `key=value` records for solve results.

use qkd_milp::format_exact;

use crate::instance::Instance;
use crate::solution::SolveReport;

/// Status, objective and bounds, the cost breakdown, every route and the
/// wavelengths on each hop, QKD and KM on separate lines (`r` reserved,
/// `e` expected utilized, `o` expected on-demand).
pub fn solve_record(inst: &Instance, report: &SolveReport) -> Vec<(String, String)> {
    let mut rec: Vec<(String, String)> = Vec::new();
    let mut put = |k: &str, v: String| rec.push((k.to_string(), v));
    let opt = |v: &Option<qkd_milp::Rational>| v.as_ref().map(format_exact).unwrap_or_else(|| "none".into());
    put("instance", inst.name.clone());
    put("status", report.status.as_str().into());
    put("objective", opt(&report.objective));
    put("best_bound", opt(&report.best_bound));
    put("nodes", report.nodes.to_string());
    put("wall_time_s", format!("{:.3}", report.wall_time.as_secs_f64()));
    put("columns", report.built.model.num_columns().to_string());
    put("rows", report.built.model.num_rows().to_string());
    put("scenarios", inst.scenarios.len().to_string());
    if let Some(d) = &report.diagnosis {
        put("diagnosis_family", d.family.as_str().into());
        put("diagnosis", d.message.clone());
    }
    let Some(plan) = &report.plan else { return rec };
    put("first_stage", format_exact(&plan.cost.first_stage));
    put("second_stage_expected", format_exact(&plan.cost.second_stage_expected));
    put("total", format_exact(&plan.cost.total));
    let links = inst.topology.links();
    for (f, route) in plan.routes.iter().enumerate() {
        put(&format!("route.{}", route.request), route.summary());
        for hop in &route.hops {
            for &k in &hop.links {
                let la = &plan.allocation.links[f][k];
                let mut e = (qkd_milp::Rational::default(), qkd_milp::Rational::default());
                let mut o = e.clone();
                for (s, x) in la.second.iter().enumerate() {
                    let p = &inst.scenarios.scenarios[s].probability;
                    let q = |v: u64| qkd_milp::Rational::from_integer(v.into());
                    e.0 += p * q(x.use_qkd);
                    e.1 += p * q(x.use_km);
                    o.0 += p * q(x.ondemand_qkd);
                    o.1 += p * q(x.ondemand_km);
                }
                let key = format!("hop.{}.{}-{}.{}", route.request, hop.from, hop.to, links[k].medium);
                put(&format!("{key}.qkd"), format!("r={} e={} o={}", la.reserve_qkd, format_exact(&e.0), format_exact(&o.0)));
                put(&format!("{key}.km"), format!("r={} e={} o={}", la.reserve_km, format_exact(&e.1), format_exact(&o.1)));
            }
        }
    }
    rec
}

pub fn render_record(rec: &[(String, String)]) -> String {
    rec.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}
