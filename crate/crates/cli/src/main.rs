fn main() {
    std::process::exit(varlp_cli::main_with_args(std::env::args_os().collect()));
}
