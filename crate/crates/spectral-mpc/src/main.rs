fn main() { std::process::exit(spectral_mpc::cli::run()); }
