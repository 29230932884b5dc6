fn main() {
    std::process::exit(chilli::cli::main_with_args(std::env::args_os()));
}
