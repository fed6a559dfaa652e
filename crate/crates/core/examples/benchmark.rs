//! Leave-one-subject-out comparison of the three calibration schemes on
//! synthetic data, printed as a summary table.
use lst_ssvep::config::RunConfig;
use lst_ssvep::eval::run_leave_one_subject_out;
use lst_ssvep::synth::generate_device;

fn main() -> lst_ssvep::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    let datasets = generate_device(0, &cfg.synth)?;
    let t = std::time::Instant::now();
    let report = run_leave_one_subject_out(&datasets, &cfg.eval, &cfg.eval_options())?;
    println!("scheme    calib  accuracy  sem");
    for s in report.summary() {
        println!("{:<9} {:>5}  {:>8.3}  {:.3}", s.scheme.as_str(), s.calib_count, s.mean_accuracy, s.sem_accuracy);
    }
    for p in &report.pairwise_tests {
        println!(
            "{} vs {} at {}: diff {:+.3} p {}",
            p.scheme_a,
            p.scheme_b,
            p.calib_count,
            p.mean_difference,
            p.p_value.map_or("n/a".into(), |v| format!("{v:.4}"))
        );
    }
    eprintln!("{} rows in {:.1?}", report.rows.len(), t.elapsed());
    Ok(())
}
