//! Prints the default run configuration as JSON.
fn main() {
    println!("{}", lst_ssvep::config::RunConfig::default().to_json_pretty());
}
