const SMALL: [&str; 20] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven",
    "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen",
];
const TENS: [&str; 8] = ["twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"];

fn small(word: &str) -> Option<u32> {
    SMALL.iter().position(|w| *w == word).map(|i| i as u32)
}

fn tens(word: &str) -> Option<u32> {
    TENS.iter().position(|w| *w == word).map(|i| 20 + 10 * i as u32)
}

fn unit(word: &str) -> Option<u32> {
    small(word).filter(|v| (1..=9).contains(v))
}

/// Parses 0..=99 at the head of `tokens`: "seven", "seventeen", "forty",
/// "forty-two" or "forty two".
fn below_hundred<S: AsRef<str>>(tokens: &[S]) -> Option<(u32, usize)> {
    let head = tokens.first()?.as_ref().to_lowercase();
    if let Some(v) = small(&head) {
        return Some((v, 1));
    }
    if let Some((t, u)) = head.split_once('-') {
        return Some((tens(t)? + unit(u)?, 1));
    }
    let t = tens(&head)?;
    match tokens.get(1).and_then(|w| unit(&w.as_ref().to_lowercase())) {
        Some(u) => Some((t + u, 2)),
        None => Some((t, 1)),
    }
}

/// Recognizes a number at the head of `window`: a digit token or an English
/// cardinal up to 999 ("twelve", "twenty-two", "one hundred and five").
///
/// Returns the value and how many tokens it spans, or `None` when the head
/// token is not numeric.
pub fn words_to_number<S: AsRef<str>>(window: &[S]) -> Option<(u32, usize)> {
    let head = window.first()?.as_ref();
    if !head.is_empty() && head.bytes().all(|b| b.is_ascii_digit()) {
        return head.parse().ok().map(|v| (v, 1));
    }
    let lowered = head.to_lowercase();
    let is_hundred = window.get(1).is_some_and(|w| w.as_ref().eq_ignore_ascii_case("hundred"));
    if let (Some(u), true) = (unit(&lowered), is_hundred) {
        let mut value = u * 100;
        let mut used = 2;
        let rest = &window[used..];
        let after_and = rest.first().is_some_and(|w| w.as_ref().eq_ignore_ascii_case("and"));
        if after_and {
            if let Some((v, k)) = below_hundred(&rest[1..]).filter(|(v, _)| *v > 0) {
                value += v;
                used += 1 + k;
            }
        } else if let Some((v, k)) = below_hundred(rest).filter(|(v, _)| *v > 0) {
            value += v;
            used += k;
        }
        return Some((value, used));
    }
    below_hundred(window)
}

/// True when the token by itself reads as a number.
pub fn is_number_token(token: &str) -> bool {
    words_to_number(&[token]).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_forms() {
        assert_eq!(words_to_number(&["twelve"]), Some((12, 1)));
        assert_eq!(words_to_number(&["twenty-two", "points"]), Some((22, 1)));
        assert_eq!(words_to_number(&["one", "hundred", "and", "five"]), Some((105, 4)));
        assert_eq!(words_to_number(&["10", "points"]), Some((10, 1)));
        assert_eq!(words_to_number(&["Thirty", "one", "rebounds"]), Some((31, 2)));
        assert_eq!(words_to_number(&["two", "hundred", "and", "points"]), Some((200, 2)));
        assert_eq!(words_to_number(&["points"]), None);
        assert_eq!(words_to_number::<&str>(&[]), None);
        assert_eq!(words_to_number(&["twenty-zero"]), None);
    }
}
