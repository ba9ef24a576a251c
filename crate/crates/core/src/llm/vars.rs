//! Line formats for list-valued prompt variables. The pipeline renders
//! lists with these helpers and the mock provider parses them back.

/// `- label` lines, each optionally followed by `  * detail` lines.
pub fn nested_lines<'a, I, D>(items: I) -> String
where
    I: IntoIterator<Item = (&'a str, D)>,
    D: IntoIterator<Item = &'a str>,
{
    let mut out = String::new();
    for (label, details) in items {
        out.push_str("- ");
        out.push_str(&one_line(label));
        out.push('\n');
        for d in details {
            out.push_str("  * ");
            out.push_str(&one_line(d));
            out.push('\n');
        }
    }
    if out.is_empty() {
        out.push_str("(none)\n");
    }
    out
}

pub fn parse_nested_lines(text: &str) -> Vec<(String, Vec<String>)> {
    let mut out: Vec<(String, Vec<String>)> = Vec::new();
    for line in text.lines() {
        if let Some(label) = line.strip_prefix("- ") {
            out.push((label.to_string(), Vec::new()));
        } else if let Some(detail) = line.strip_prefix("  * ") {
            if let Some(last) = out.last_mut() {
                last.1.push(detail.to_string());
            }
        }
    }
    out
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
