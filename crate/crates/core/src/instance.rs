//! Line-oriented instance files.
//!
//! ```text
//! # comment lines and trailing comments are ignored
//! goods 3
//! units 1 1 1
//! bids 2
//! 1.5 1 1 0
//! 2 0 1 1
//! ```
//!
//! Each bid line is `price q_1 ... q_n`. Prices are plain decimals at the
//! reader's [`PriceScale`]; quantities are non-negative integers.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Auction, Bid, PriceScale};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses an instance at the default price scale.
pub fn parse_instance(text: &str) -> Result<Auction> {
    parse_instance_with_scale(text, PriceScale::default())
}

pub fn parse_instance_with_scale(text: &str, scale: PriceScale) -> Result<Auction> {
    read_instance(text.as_bytes(), scale)
}

pub fn read_instance_file(path: &Path, scale: PriceScale) -> Result<Auction> {
    let file = std::fs::File::open(path)?;
    read_instance(std::io::BufReader::new(file), scale)
}

pub fn read_instance<R: BufRead>(source: R, scale: PriceScale) -> Result<Auction> {
    let mut goods: Option<usize> = None;
    let mut stock: Option<Vec<u32>> = None;
    let mut expected_bids: Option<(usize, usize)> = None;
    let mut bids: Vec<Bid> = Vec::new();

    for (n, line) in source.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        let mut fields = content.split_whitespace();
        let Some(first) = fields.next() else {
            continue;
        };
        match (goods, &stock, expected_bids) {
            (None, _, _) => {
                if first != "goods" {
                    return Err(parse_err(line_no, format!("expected `goods`, found `{first}`")));
                }
                let n = parse_count(fields.next(), line_no, "goods")?;
                expect_end(fields, line_no)?;
                goods = Some(n);
            }
            (Some(n), None, _) => {
                if first != "units" {
                    return Err(parse_err(line_no, format!("expected `units`, found `{first}`")));
                }
                let units = fields
                    .map(|f| {
                        f.parse::<u32>()
                            .map_err(|_| parse_err(line_no, format!("bad unit count `{f}`")))
                    })
                    .collect::<Result<Vec<u32>>>()?;
                if units.len() != n {
                    return Err(parse_err(
                        line_no,
                        format!("expected {n} unit counts, found {}", units.len()),
                    ));
                }
                stock = Some(units);
            }
            (Some(_), Some(_), None) => {
                if first != "bids" {
                    return Err(parse_err(line_no, format!("expected `bids`, found `{first}`")));
                }
                let m = parse_count(fields.next(), line_no, "bids")?;
                expect_end(fields, line_no)?;
                expected_bids = Some((m, line_no));
                bids.reserve(m);
            }
            (Some(n), Some(_), Some((m, _))) => {
                if bids.len() == m {
                    return Err(parse_err(line_no, format!("more than the declared {m} bids")));
                }
                let price = scale
                    .parse(first)
                    .map_err(|msg| parse_err(line_no, msg))?;
                let quantities = fields
                    .map(|f| {
                        f.parse::<u32>()
                            .map_err(|_| parse_err(line_no, format!("bad quantity `{f}`")))
                    })
                    .collect::<Result<Vec<u32>>>()?;
                if quantities.len() != n {
                    return Err(parse_err(
                        line_no,
                        format!("expected {n} quantities, found {}", quantities.len()),
                    ));
                }
                bids.push(Bid::new(quantities, price));
            }
        }
    }

    let (Some(_), Some(stock), Some((m, header_line))) = (goods, stock, expected_bids) else {
        return Err(parse_err(0, "truncated instance header"));
    };
    if bids.len() != m {
        return Err(parse_err(
            header_line,
            format!("declared {m} bids but found {}", bids.len()),
        ));
    }
    if stock.is_empty() {
        return Err(parse_err(0, "an auction needs at least one good"));
    }
    Auction::with_scale(stock, bids, scale)
}

fn parse_count(field: Option<&str>, line: usize, what: &str) -> Result<usize> {
    field
        .ok_or_else(|| parse_err(line, format!("missing {what} count")))?
        .parse()
        .map_err(|_| parse_err(line, format!("bad {what} count")))
}

fn expect_end<'a>(mut fields: impl Iterator<Item = &'a str>, line: usize) -> Result<()> {
    match fields.next() {
        Some(extra) => Err(parse_err(line, format!("unexpected `{extra}`"))),
        None => Ok(()),
    }
}

/// Writes `auction`, preceded by `metadata` rendered as `# key: value`
/// comment lines.
pub fn write_instance<W: Write>(
    auction: &Auction,
    out: &mut W,
    metadata: &[(String, String)],
) -> Result<()> {
    for (key, value) in metadata {
        writeln!(out, "# {key}: {value}")?;
    }
    writeln!(out, "goods {}", auction.num_goods())?;
    write!(out, "units")?;
    for k in auction.stock() {
        write!(out, " {k}")?;
    }
    writeln!(out)?;
    writeln!(out, "bids {}", auction.num_bids())?;
    let scale = auction.scale();
    for bid in auction.bids() {
        write!(out, "{}", scale.format(bid.price))?;
        for q in &bid.quantities {
            write!(out, " {q}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn instance_to_string(auction: &Auction, metadata: &[(String, String)]) -> String {
    let mut buf = Vec::new();
    write_instance(auction, &mut buf, metadata).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("instance text is ASCII")
}
