fn main() {
    std::process::exit(operad_lax::cli::run(std::env::args_os()));
}
