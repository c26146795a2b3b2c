fn main() {
    std::process::exit(dae_jump::cli::main_with_args(std::env::args_os()));
}
