//! The default entity classes every new project starts with.

/// `(label, description)` of the 18 OntoNotes-style classes emitted by the
/// CKIP Traditional Chinese NER model, in the order they receive palette
/// slots.
pub const BUILTIN_CLASSES: [(&str, &str); 18] = [
    ("CARDINAL", "數字"),
    ("DATE", "日期"),
    ("EVENT", "事件"),
    ("FAC", "設施"),
    ("GPE", "行政區"),
    ("LANGUAGE", "語言"),
    ("LAW", "法律"),
    ("LOC", "地理區"),
    ("MONEY", "金錢"),
    ("NORP", "民族、宗教、政治團體"),
    ("ORDINAL", "序數"),
    ("ORG", "組織"),
    ("PERCENT", "百分比率"),
    ("PERSON", "人物"),
    ("PRODUCT", "產品"),
    ("QUANTITY", "數量"),
    ("TIME", "時間"),
    ("WORK_OF_ART", "作品"),
];

pub fn is_builtin(label: &str) -> bool {
    BUILTIN_CLASSES.iter().any(|(l, _)| *l == label)
}
