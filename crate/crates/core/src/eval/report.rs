use super::PrfScores;

/// Plain-text table with one row per system.
pub fn render_table<'a, I>(rows: I) -> String
where
    I: IntoIterator<Item = (&'a str, &'a PrfScores)>,
{
    let rows: Vec<_> = rows.into_iter().collect();
    let width = rows
        .iter()
        .map(|(label, _)| label.len())
        .chain(["System".len()])
        .max()
        .unwrap_or(0);
    let mut out = format!(
        "{:<width$}  {:>9}  {:>6}  {:>6}\n",
        "System", "Precision", "Recall", "F1"
    );
    for (label, s) in rows {
        out.push_str(&format!(
            "{label:<width$}  {:>9.2}  {:>6.2}  {:>6.2}\n",
            s.precision, s.recall, s.f1
        ));
    }
    out
}

pub fn render_csv<'a, I>(rows: I) -> String
where
    I: IntoIterator<Item = (&'a str, &'a PrfScores)>,
{
    let mut out = String::from("system,precision,recall,f1,tp,fp,fn\n");
    for (label, s) in rows {
        let label = if label.contains([',', '"']) {
            format!("\"{}\"", label.replace('"', "\"\""))
        } else {
            label.to_owned()
        };
        out.push_str(&format!(
            "{label},{:.2},{:.2},{:.2},{},{},{}\n",
            s.precision, s.recall, s.f1, s.tp, s.fp, s.fn_
        ));
    }
    out
}
