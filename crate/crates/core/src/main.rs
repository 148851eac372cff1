fn main() {
    std::process::exit(diqkd::cli::main_with_args(std::env::args_os()));
}
