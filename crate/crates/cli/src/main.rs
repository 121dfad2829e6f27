fn main() {
    std::process::exit(gpwlab_cli::main_with(std::env::args_os()));
}
