fn main() {
    println!("yamabe-lab");
}
