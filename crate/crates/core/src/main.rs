use clap::Parser;
use fjrw_core::cli::{self, Args, THREADS_ENV};

fn main() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool configured once");
    }
    let args = Args::parse();
    std::process::exit(cli::main_with(&args));
}
