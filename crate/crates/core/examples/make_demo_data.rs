//! Writes a demo tree (prototypes, trained models, attempts, a session
//! script and a config) to the directory given as the first argument.
//!
//! ```text
//! cargo run --example make_demo_data -- /tmp/demo
//! affectplay --config /tmp/demo/affectplay.conf session --script /tmp/demo/session.txt --spawn
//! ```

use std::path::PathBuf;

use affectplay::fixtures::write_demo_data;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("demo"));
    let seed = std::env::args().nth(2).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let demo = write_demo_data(&root, seed)?;
    println!("config  {}", demo.config.display());
    println!("script  {}", demo.script.display());
    println!("survey  {}", demo.survey.display());
    Ok(())
}
