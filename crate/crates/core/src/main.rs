fn main() {
    let code = bagprop::cli::run(std::env::args_os());
    std::process::exit(code);
}
