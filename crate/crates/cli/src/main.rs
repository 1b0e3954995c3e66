fn main() {
    let out = roesser2d_cli::run(std::env::args_os());
    print!("{}", out.stdout);
    std::process::exit(out.code);
}
