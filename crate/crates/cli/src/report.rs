//! CSV emission. Floats use the shortest round-trip formatting and every
//! record ends in a bare LF, so equal inputs give byte-identical files.

use std::io::{self, Write};

use conic_duality_core::duality::{DualStatus, PrimalStatus};
use conic_duality_core::{
    DualityReport, ExtReal, MarketModel, PricingProcess, ScalarSolveReport, ScenarioTree,
    TerminalPosition, TransferPlan, UpperImage,
};

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn coords(prefix: &str, d: usize) -> impl Iterator<Item = String> + '_ {
    (1..=d).map(move |i| format!("{prefix}{i}"))
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn ext(v: ExtReal) -> String {
    match v {
        ExtReal::Finite(x) => num(x),
        other => other.to_string(),
    }
}

fn status(r: &ScalarSolveReport) -> String {
    let mut parts = Vec::new();
    match r.primal.status {
        PrimalStatus::Optimal => {}
        PrimalStatus::Unbounded => parts.push("primal_unbounded"),
        PrimalStatus::Unattained => parts.push("primal_unattained"),
    }
    if r.dual.status == DualStatus::NoInteriorPoint {
        parts.push("dual_no_interior_point");
    }
    if parts.is_empty() {
        "optimal".to_string()
    } else {
        parts.join("+")
    }
}

pub fn write_scalarizations<W: Write>(
    w: W,
    d: usize,
    reports: &[ScalarSolveReport],
) -> io::Result<()> {
    let mut wr = writer(w);
    let mut header: Vec<String> = coords("z", d).collect();
    header.extend(
        [
            "primal_value",
            "dual_value",
            "gap",
            "iters_p",
            "iters_d",
            "status",
        ]
        .map(String::from),
    );
    wr.write_record(&header)?;
    for r in reports {
        let mut row: Vec<String> = r.weight.as_slice().iter().map(|&v| num(v)).collect();
        row.push(ext(r.primal.value));
        row.push(ext(r.dual.value));
        row.push(num(r.gap));
        row.push(r.primal.iterations.to_string());
        row.push(r.dual.iterations.to_string());
        row.push(status(r));
        wr.write_record(&row)?;
    }
    wr.flush()
}

pub fn write_outer<W: Write>(w: W, d: usize, img: &UpperImage) -> io::Result<()> {
    let mut wr = writer(w);
    let mut header: Vec<String> = coords("w", d).collect();
    header.push("support".into());
    wr.write_record(&header)?;
    for h in &img.outer {
        let mut row: Vec<String> = h.normal.as_slice().iter().map(|&v| num(v)).collect();
        row.push(ext(h.support));
        wr.write_record(&row)?;
    }
    wr.flush()
}

pub fn write_inner<W: Write>(w: W, d: usize, img: &UpperImage) -> io::Result<()> {
    let mut wr = writer(w);
    wr.write_record(coords("q", d))?;
    for q in &img.inner {
        wr.write_record(q.iter().map(|&v| num(v)))?;
    }
    wr.flush()
}

pub fn write_summary<W: Write>(w: W, rep: &DualityReport) -> io::Result<()> {
    let mut wr = writer(w);
    wr.write_record([
        "weights",
        "max_relative_gap",
        "max_abs_gap",
        "sandwich_slack",
        "slater",
        "no_arbitrage",
        "skipped",
        "runtime_s",
    ])?;
    let max_abs = rep.reports.iter().map(|r| r.gap.abs()).fold(0.0, f64::max);
    wr.write_record([
        rep.reports.len().to_string(),
        num(rep.max_relative_gap),
        num(max_abs),
        num(rep.upper.sandwich_slack()),
        rep.slater.to_string(),
        rep.no_arbitrage.to_string(),
        rep.upper.skipped.len().to_string(),
        num(rep.seconds),
    ])?;
    wr.flush()
}

/// `node, time, z1..zd` per tree node.
pub fn write_certificate<W: Write>(
    w: W,
    tree: &ScenarioTree,
    z: &PricingProcess,
) -> io::Result<()> {
    let d = z.z.dim();
    let mut wr = writer(w);
    let mut header = vec!["node".to_string(), "time".to_string()];
    header.extend(coords("z", d));
    wr.write_record(&header)?;
    for (id, node) in tree.nodes().iter().enumerate() {
        let mut row = vec![id.to_string(), node.time.to_string()];
        row.extend(z.z.node(id).iter().map(|&v| num(v)));
        wr.write_record(&row)?;
    }
    wr.flush()
}

/// Leaf positions followed by the nonzero plan coefficients.
pub fn write_witness<W: Write>(
    mut w: W,
    market: &MarketModel,
    x: &TerminalPosition,
    plan: &TransferPlan,
) -> io::Result<()> {
    let d = x.dim();
    {
        let mut wr = writer(&mut w);
        let mut header = vec!["leaf".to_string()];
        header.extend(coords("x", d));
        wr.write_record(&header)?;
        for k in 0..x.num_leaves() {
            let mut row = vec![k.to_string()];
            row.extend(x.leaf(k).iter().map(|&v| num(v)));
            wr.write_record(&row)?;
        }
        wr.flush()?;
    }
    writeln!(w)?;
    let mut wr = writer(&mut w);
    let mut header = vec![
        "node".to_string(),
        "generator".to_string(),
        "coeff".to_string(),
    ];
    header.extend(coords("g", d));
    wr.write_record(&header)?;
    for (node, coeffs) in plan.coeffs.iter().enumerate() {
        let gens = market.cone(node).generators();
        for (g, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                let mut row = vec![node.to_string(), g.to_string(), num(c)];
                row.extend(gens[g].iter().map(|&v| num(v)));
                wr.write_record(&row)?;
            }
        }
    }
    wr.flush()
}
