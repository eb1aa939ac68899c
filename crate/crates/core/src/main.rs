use clap::Parser;
use rabi_hubbard::cli::{exit_code, run, write_bundle, Cli};

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(bundle) => match &cli.out {
            Some(dir) => match write_bundle(&bundle, dir) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code(&e)
                }
            },
            None => {
                for f in &bundle.files {
                    println!("==> {} <==\n{}", f.name, f.body);
                }
                0
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    std::process::exit(code);
}
