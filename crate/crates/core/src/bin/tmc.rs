fn main() {
    std::process::exit(tmc::cli::main_with_args(std::env::args_os()));
}
