use clap::Parser;

use xisim::args::{dispatch, Cli};

fn main() {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    let code = match dispatch(cli, &mut stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("xisim: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
