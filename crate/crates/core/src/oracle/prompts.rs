//! Prompt templates. The wording lives in `assets/prompts/*.txt` so it can
//! be edited without touching code.

use super::{OracleQuery, QueryKind};

pub const DIRECTION: &str = include_str!("../../assets/prompts/direction.txt");
pub const KEYPOINT: &str = include_str!("../../assets/prompts/keypoint.txt");
pub const BASE: &str = include_str!("../../assets/prompts/base.txt");

pub fn template(kind: QueryKind) -> &'static str {
    match kind {
        QueryKind::Direction => DIRECTION,
        QueryKind::Keypoint => KEYPOINT,
        QueryKind::RankCandidates => BASE,
    }
}

pub fn render(query: &OracleQuery) -> String {
    let ids: Vec<String> = query.options.iter().map(|o| o.index.to_string()).collect();
    let range = match (ids.first(), ids.last()) {
        (Some(a), Some(b)) => format!("{a}-{b}"),
        _ => String::new(),
    };
    template(query.kind)
        .replace("{instruction}", &query.instruction)
        .replace("{options}", &ids.join(", "))
        .replace("{ids}", &range)
        .replace("{want}", &query.want.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::OptionItem;

    #[test]
    fn placeholders_are_filled() {
        let q = OracleQuery {
            kind: QueryKind::RankCandidates,
            instruction: "open the dishwasher".into(),
            attachments: vec![],
            options: (0..20).map(|i| OptionItem { index: i, position: None, bearing: None }).collect(),
            want: 3,
        };
        let text = render(&q);
        assert!(text.contains("open the dishwasher"));
        assert!(text.contains("IDs 0-19"));
        assert!(text.contains("Select the 3 best"));
        assert!(!text.contains('{'));
        for k in [QueryKind::Direction, QueryKind::Keypoint] {
            assert!(template(k).contains("ANSWER:"));
        }
    }
}
