fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    ddae_hinf::cli::configure_threads();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = ddae_hinf::cli::run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    std::process::exit(code);
}
