fn main() {
    std::process::exit(torus_sir::cli::run_cli(std::env::args_os()));
}
