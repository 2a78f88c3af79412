fn main() {
    std::process::exit(sdgame_cli::main_with_args(std::env::args_os()));
}
