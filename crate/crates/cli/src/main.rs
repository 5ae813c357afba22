use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    // die quietly when a downstream pipe (head, less) closes early
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = etqkd_cli::Cli::parse();
    match etqkd_cli::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
