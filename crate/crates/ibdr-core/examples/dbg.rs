use ibdr_core::graph::*;
use ibdr_core::solver::*;

fn main() {
    let g = parse_graph(
        "graph 4 1 1\ne 0 0 -\ne 0 0 o1:1\ne 1 0 o1:1\ne 1 0 o2:1\ne 1 2 o1:1\ne 2 3 o2:1\ne 3 3 o1:1\n",
    )
    .unwrap();
    let bare = solve_d1d1(&g, None).unwrap();
    println!("bare:  {:?}", bare.classes());

    for (ua, sl, tr) in [
        (true, false, false),
        (false, true, false),
        (false, false, true),
        (true, true, true),
    ] {
        let mut opts = PipelineOptions::bare(SolveMode::D1D1);
        opts.underapprox = ua;
        opts.selfloop_pass = sl;
        opts.trim = tr;
        let out = pipeline(&g, opts).unwrap();
        println!(
            "ua={ua} sl={sl} tr={tr}: {:?} {}",
            out.partition.classes(),
            if out.partition == bare { "OK" } else { "MISMATCH" }
        );
    }
    // trim detail
    let out = trim_motifs(&g, TRIM_RADIUS);
    println!("trim removed: {:?}", out.report.removed);
    println!("trim residual:\n{}", serialize_graph(&out.graph));
}
