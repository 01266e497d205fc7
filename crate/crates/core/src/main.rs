fn main() {
    std::process::exit(noisesim::cli::main_with_args(std::env::args_os()));
}
