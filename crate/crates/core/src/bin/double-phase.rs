fn main() {
    std::process::exit(double_phase::cli::main_with_args(std::env::args_os()));
}
