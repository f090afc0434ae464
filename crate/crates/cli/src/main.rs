use clap::Parser;
use openorbit_cli::{run, Cli};

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => println!("{}", out.display()),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
