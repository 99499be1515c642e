use clap::Parser;

use mpet_adapt::cli::{main_with, Args};

fn main() {
    let args = Args::parse();
    match main_with(&args) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
