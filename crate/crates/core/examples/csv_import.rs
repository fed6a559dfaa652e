//! Imports a directory of per-trial CSV files with shuffled channel columns.
use std::fmt::Write as _;

use lst_ssvep::domain::{standard_stimulus_table, DomainId, Montage};
use lst_ssvep::io::import_csv_dir;

fn main() -> lst_ssvep::Result<()> {
    let dir = std::env::temp_dir().join("lst-ssvep-csv-import");
    std::fs::create_dir_all(&dir)?;
    let columns = ["O2", "Oz", "O1"];
    for stim in 1..=2 {
        for trial in 0..2 {
            let mut text = columns.join(",") + "\n";
            for j in 0..384 {
                let t = j as f64 / 256.0;
                let v = (2.0 * std::f64::consts::PI * (7.8 + 0.2 * stim as f64) * t).sin();
                let _ = writeln!(text, "{:.6},{:.6},{:.6}", 0.5 * v, v, 0.8 * v);
            }
            std::fs::write(dir.join(format!("{stim}_{trial}.csv")), text)?;
        }
    }
    let montage = Montage::new("lab", vec!["O1".into(), "Oz".into(), "O2".into()], 256.0, 0.14)?;
    let ds = import_csv_dir(&dir, DomainId::new("S01", "1", "lab"), montage, standard_stimulus_table()[..2].to_vec())?;
    for e in ds.sorted_epochs() {
        println!(
            "stimulus {} trial {}: first sample per channel {:.3} {:.3} {:.3}",
            e.stimulus_index,
            e.trial_index,
            e.data[(0, 1)],
            e.data[(1, 1)],
            e.data[(2, 1)]
        );
    }
    Ok(())
}
