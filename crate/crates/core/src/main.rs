fn main() {
    std::process::exit(opqso::cli::run_from_args(std::env::args_os()));
}
