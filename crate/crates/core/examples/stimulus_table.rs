//! Prints the 40-target frequency/phase grid.
use lst_ssvep::domain::{standard_index_for_frequency, standard_stimulus_table};

fn main() {
    println!("index  freq (Hz)  phase (pi rad)");
    for s in standard_stimulus_table() {
        assert_eq!(standard_index_for_frequency(s.frequency_hz), s.index);
        println!("{:>5}  {:>9.1}  {:>14.2}", s.index, s.frequency_hz, s.phase_rad / std::f64::consts::PI);
    }
}
