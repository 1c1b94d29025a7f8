use clap::Parser;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let verbosity = uatomo::cli::Cli::try_parse_from(&args)
        .map(|c| c.global.verbose)
        .unwrap_or(0);
    let default_level = match verbosity {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default_level))
        .init();
    std::process::exit(uatomo::cli::main_with_args(args));
}
