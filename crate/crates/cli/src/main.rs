fn main() {
    std::process::exit(forge_cli::main_with_args(std::env::args_os()));
}
