fn main() {
    std::process::exit(acdc::cli::main_with(std::env::args_os()));
}
