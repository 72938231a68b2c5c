fn main() {
    std::process::exit(qnet_privacy::cli::main_with_args(std::env::args_os()));
}
