fn main() {
    std::process::exit(flowplex_cli::run(std::env::args_os()));
}
