use clap::Parser;
use nlunmix::cli::{dispatch, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    if let Err(e) = dispatch(Cli::parse()) {
        eprintln!("error[{}]: {}", e.code(), e.to_string().replace('\n', " "));
        std::process::exit(e.exit_code());
    }
}
