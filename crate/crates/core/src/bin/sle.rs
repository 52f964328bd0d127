fn main() {
    std::process::exit(sle_core::cli::run_cli(std::env::args_os()));
}
