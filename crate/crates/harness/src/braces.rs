/// 0 iff every `}` closes an earlier `{` and none stay open.
pub fn brace_validity(s: &str) -> u8 {
    let mut depth: i64 = 0;
    for ch in s.chars() {
        match ch {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth < 0 {
                    return 1;
                }
            }
            _ => {}
        }
    }
    u8::from(depth != 0)
}
