use clap::Parser;

use netslice::cli::{self, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    configure_threads();
    std::process::exit(cli::execute(Cli::parse()));
}

#[cfg(feature = "parallel")]
fn configure_threads() {
    let Ok(value) = std::env::var(cli::THREADS_ENV) else {
        return;
    };
    match value.parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("could not size the worker pool: {e}");
            }
        }
        _ => log::warn!("ignoring {}={value:?}: expected a positive integer", cli::THREADS_ENV),
    }
}

#[cfg(not(feature = "parallel"))]
fn configure_threads() {
    if std::env::var_os(cli::THREADS_ENV).is_some() {
        log::warn!("{} has no effect without the parallel feature", cli::THREADS_ENV);
    }
}
