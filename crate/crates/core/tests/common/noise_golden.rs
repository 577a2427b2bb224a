//! Hand-written expected outputs for every noise operator.

use std::collections::BTreeSet;

use formulakit::objectives::NoiseOperator;
use formulakit::Lexer;

pub enum Expect {
    /// The complete candidate set.
    Exactly(&'static [&'static str]),
    /// Candidate count plus a sample of members.
    Contains(usize, &'static [&'static str]),
}

pub struct Golden {
    pub op: u8,
    pub formula: &'static str,
    pub expect: Expect,
}

use Expect::*;

const fn g(op: u8, formula: &'static str, expect: Expect) -> Golden {
    Golden { op, formula, expect }
}

pub const GOLDEN: &[Golden] = &[
    g(
        1,
        "=SUM(A1:A10)",
        Exactly(&[
            "=SUM(A1;A10)",
            "=SUM(A1,A10)",
            "=SUM(A1 A10)",
            "=SUM(A1\"A10)",
            "=SUM(A1A10)",
        ]),
    ),
    g(
        1,
        "=A1:B2",
        Exactly(&["=A1;B2", "=A1,B2", "=A1 B2", "=A1\"B2", "=A1B2"]),
    ),
    g(
        1,
        "=COUNTIF($B$2:$B$9,\"x\")",
        Exactly(&[
            "=COUNTIF($B$2;$B$9,\"x\")",
            "=COUNTIF($B$2,$B$9,\"x\")",
            "=COUNTIF($B$2 $B$9,\"x\")",
            "=COUNTIF($B$2\"$B$9,\"x\")",
            "=COUNTIF($B$2$B$9,\"x\")",
        ]),
    ),
    g(1, "=A1+B1", Exactly(&[])),
    g(
        2,
        "=SUM(A1:B10)",
        Exactly(&["=SUM(1:B10)", "=SUM(A:B10)", "=SUM(A1:10)", "=SUM(A1:B)"]),
    ),
    g(
        2,
        "=$A$1:$C$3",
        Exactly(&["=$1:$C$3", "=$A:$C$3", "=$A$1:$3", "=$A$1:$C"]),
    ),
    g(2, "=AB12:AC7", Exactly(&["=12:AC7", "=AB:AC7", "=AB12:7", "=AB12:AC"])),
    g(3, "=SUM(A1:A10)", Exactly(&["=SUM (A1:A10)"])),
    g(
        3,
        "=IF(ISBLANK(A1),0,1)",
        Exactly(&["=IF (ISBLANK(A1),0,1)", "=IF(ISBLANK (A1),0,1)"]),
    ),
    g(
        3,
        "=ROUND(SUM(A1:A3),2)",
        Exactly(&["=ROUND (SUM(A1:A3),2)", "=ROUND(SUM (A1:A3),2)"]),
    ),
    g(3, "=A1+1", Exactly(&[])),
    g(
        4,
        "=IF(A2>10, True, False)",
        Exactly(&[
            "=IF(A2>10, True, False, A2>10)",
            "=IF(A2>10, True, False, True)",
            "=IF(A2>10, True, False, False)",
        ]),
    ),
    g(4, "=IF(A1>0,1)", Exactly(&["=IF(1)", "=IF(A1>0)"])),
    g(4, "=ABS(A1)", Exactly(&["=ABS()", "=ABS(A1,A1)"])),
    // no upper bound on SUM
    g(4, "=SUM(A1,A2)", Exactly(&[])),
    g(
        5,
        "=IF(A1>10, 1, 2)",
        Exactly(&["=IF(1, A1>10, 2)", "=IF(2, 1, A1>10)"]),
    ),
    g(
        5,
        "=VLOOKUP(A1,B1:C9,2,FALSE)",
        Exactly(&[
            "=VLOOKUP(2,B1:C9,A1,FALSE)",
            "=VLOOKUP(FALSE,B1:C9,2,A1)",
            "=VLOOKUP(A1,2,B1:C9,FALSE)",
            "=VLOOKUP(A1,FALSE,2,B1:C9)",
            "=VLOOKUP(A1,B1:C9,FALSE,2)",
        ]),
    ),
    g(5, "=COUNTIF(A1:A9,\">0\")", Exactly(&["=COUNTIF(\">0\",A1:A9)"])),
    g(5, "=SUM(A1,B2)", Exactly(&[])),
    g(6, "=IF(A1<=B1,1,0)", Exactly(&["=IF(A1< =B1,1,0)"])),
    g(6, "=A1>=2", Exactly(&["=A1> =2"])),
    g(
        6,
        "=IF(A1<>B1,A1>=0)",
        Exactly(&["=IF(A1< >B1,A1>=0)", "=IF(A1<>B1,A1> =0)"]),
    ),
    g(6, "=A1<B1", Exactly(&[])),
    g(7, "=A1<=B1", Exactly(&["=A1=<B1"])),
    g(7, "=A1>=B1", Exactly(&["=A1=>B1"])),
    g(7, "=A1<>B1", Exactly(&["=A1><B1"])),
    g(7, "=A1<B1", Exactly(&[])),
    g(8, "=A1<>B1", Exactly(&["=A1!=B1", "=A1=!B1"])),
    g(
        8,
        "=IF(A1<>\"\",1,0)",
        Exactly(&["=IF(A1!=\"\",1,0)", "=IF(A1=!\"\",1,0)"]),
    ),
    g(
        8,
        "=AND(A1<>1,B1<>2)",
        Exactly(&[
            "=AND(A1!=1,B1<>2)",
            "=AND(A1=!1,B1<>2)",
            "=AND(A1<>1,B1!=2)",
            "=AND(A1<>1,B1=!2)",
        ]),
    ),
    g(8, "=A1<=B1", Exactly(&[])),
    g(9, "=IF(A1=1,2,3)", Exactly(&["=IF(A1==1,2,3)", "=IF(A1===1,2,3)"])),
    g(9, "=A1=B1", Exactly(&["=A1==B1", "=A1===B1"])),
    g(
        9,
        "=SUMIF(A1:A9,B1=C1)",
        Exactly(&["=SUMIF(A1:A9,B1==C1)", "=SUMIF(A1:A9,B1===C1)"]),
    ),
    g(9, "=A1+B1", Exactly(&[])),
    g(10, "='Sheet 1'!A10", Exactly(&["=Sheet 1!A10", "=\"Sheet 1\"!A10"])),
    g(
        10,
        "=SUM('My Data'!B2:B9)",
        Exactly(&["=SUM(My Data!B2:B9)", "=SUM(\"My Data\"!B2:B9)"]),
    ),
    g(10, "='Q1 2020'!C3+1", Exactly(&["=Q1 2020!C3+1", "=\"Q1 2020\"!C3+1"])),
    g(10, "=Sheet2!A1", Exactly(&[])),
    g(11, "=Sheet2!A1", Exactly(&["=Sheet2A1"])),
    g(11, "='Sheet 1'!A10", Exactly(&["='Sheet 1'A10"])),
    g(
        11,
        "=SUM(Data!A1,Data!B1)",
        Exactly(&["=SUM(DataA1,Data!B1)", "=SUM(Data!A1,DataB1)"]),
    ),
    g(12, "=IF(A1=\"x\",1,0)", Exactly(&["=IF(A1=x,1,0)", "=IF(A1='x',1,0)"])),
    g(
        12,
        "=CONCATENATE(A1,\" \",B1)",
        Exactly(&["=CONCATENATE(A1, ,B1)", "=CONCATENATE(A1,' ',B1)"]),
    ),
    g(
        12,
        "=\"a\"&\"b\"",
        Exactly(&["=a&\"b\"", "='a'&\"b\"", "=\"a\"&b", "=\"a\"&'b'"]),
    ),
    g(13, "=SUM(A1)", Exactly(&["=SUM(A1,)", "=SUM(A1,"])),
    g(
        13,
        "=IF(A1,MAX(B1),0)",
        Exactly(&[
            "=IF(A1,MAX(B1,),0)",
            "=IF(A1,MAX(B1,,0)",
            "=IF(A1,MAX(B1),0,)",
            "=IF(A1,MAX(B1),0,",
        ]),
    ),
    g(13, "=(A1+1)*2", Exactly(&["=(A1+1,)*2", "=(A1+1,*2"])),
    g(13, "=A1+1", Exactly(&[])),
    g(
        14,
        "=A1",
        Exactly(&[
            "=+A1", "=-A1", "=*A1", "=/A1", "=^A1", "=&A1", "=<A1", "=>A1", "==A1", "=.A1", "=)A1", "=#A1",
        ]),
    ),
    g(14, "=A1+B1", Contains(36, &["=-A1+B1", "=A1#+B1", "=A1+*B1"])),
    g(14, "=SUM(A1)", Contains(48, &["=&SUM(A1)", "=SUM(^A1)", "=SUM(A1=)"])),
    // `.` would fuse with a preceding word or number
    g(
        15,
        "=A1",
        Exactly(&[
            "=A1+", "=A1-", "=A1*", "=A1/", "=A1^", "=A1&", "=A1<", "=A1>", "=A1=", "=A1)", "=A1#",
        ]),
    ),
    g(15, "=SUM(A1)", Contains(12, &["=SUM(A1).", "=SUM(A1))", "=SUM(A1)+"])),
    g(15, "=B2*3", Contains(11, &["=B2*3/", "=B2*3#"])),
    g(16, "=A1", Exactly(&["=()A1", "=(A1)", "=)A1(", "=A1()"])),
    g(
        16,
        "=A1+B1",
        Contains(16, &["=(A1)+B1", "=A1+(B1)", "=(A1+B1)", "=A1)+(B1", "=()A1+B1"]),
    ),
    g(
        16,
        "=SUM(A1)",
        Contains(25, &["=SUM((A1))", "=(SUM(A1))", "=SUM()(A1)"]),
    ),
    g(
        17,
        "=A1",
        Exactly(&[
            "=,A1", "=(A1", "=)A1", "=:A1", "=!A1", "=\"A1", "='A1", "=A1,", "=A1(", "=A1)", "=A1:", "=A1!", "=A1\"",
            "=A1'",
        ]),
    ),
    g(
        17,
        "=SUM(A1,B1)",
        Contains(
            70,
            &["=SUM(A1B1)", "=SUM(A1:B1)", "=SUM(A1,B1", "=SUM(A1,(B1)", "=SUMA1,B1)"],
        ),
    ),
    g(
        17,
        "=IF(A1=\"x\",1,0)",
        Contains(0, &["=IF(A1=x\",1,0)", "=IF(A1=\"x',1,0)", "=IF(A1=\"x\"1,0)"]),
    ),
];

/// Whether an output of `op` produced by `variant` must fail the checker.
pub fn breaks_syntax(op: u8, variant: &str) -> bool {
    match op {
        2 | 4 | 6 | 7 | 8 | 9 | 13 | 15 => true,
        1 => variant != "replace ,",
        12 => variant == "single quotes",
        16 => variant.ends_with("unbalanced"),
        _ => false,
    }
}

/// Runs every case; returns the number of outputs checked.
pub fn run() -> Result<usize, String> {
    let lexer = Lexer::default();
    let mut checked = 0;
    let mut seen = [0usize; 17];
    for case in GOLDEN {
        let op = NoiseOperator::from_id(case.op).ok_or(format!("no operator {}", case.op))?;
        let got = op.candidates(case.formula, &lexer);
        let outputs: BTreeSet<&str> = got.iter().map(|n| n.output.as_str()).collect();
        let ctx = |msg: String| format!("op {} on {:?}: {msg}", case.op, case.formula);
        match case.expect {
            Exactly(want) => {
                let want: BTreeSet<&str> = want.iter().copied().collect();
                if outputs != want {
                    return Err(ctx(format!("got {outputs:?}, want {want:?}")));
                }
                if outputs.len() != got.len() {
                    return Err(ctx("duplicate candidates".into()));
                }
            }
            Contains(n, want) => {
                if n > 0 && got.len() != n {
                    return Err(ctx(format!("{} candidates, want {n}", got.len())));
                }
                if let Some(w) = want.iter().find(|w| !outputs.contains(**w)) {
                    return Err(ctx(format!("missing {w:?}")));
                }
            }
        }
        if op.is_applicable(case.formula, &lexer) == got.is_empty() {
            return Err(ctx("applicability disagrees with candidates".into()));
        }
        if !got.is_empty() {
            seen[usize::from(case.op - 1)] += 1;
        }
        for n in &got {
            if n.output == case.formula {
                return Err(ctx(format!("{:?} left the formula unchanged", n.variant)));
            }
            if breaks_syntax(case.op, &n.variant) && lexer.check(&n.output).is_empty() {
                return Err(ctx(format!("{:?} ({}) passes the checker", n.output, n.variant)));
            }
            checked += 1;
        }
    }
    if let Some(i) = seen.iter().position(|&c| c < 3) {
        return Err(format!("op {} has only {} applicable cases", i + 1, seen[i]));
    }
    Ok(checked)
}
