//! Seeded synthetic corpora. Two generators mimic the shape and signal
//! structure of widely used benchmark tables (a census income table and a
//! consumer credit table); a third is a small smoke-test corpus. Generators
//! emit CSV text that ingests against the bundled schema configs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::rng::derive_stream;

use super::dataset::format_num;
use super::{load_csv_str, Dataset, SchemaConfig, TabularError};

pub const ADULT_SCHEMA_TOML: &str = include_str!("../../assets/adult.schema.toml");
pub const GERMAN_SCHEMA_TOML: &str = include_str!("../../assets/german.schema.toml");
pub const TOY_SCHEMA_TOML: &str = r#"
label = "y"
positive = "yes"

[[feature]]
name = "x"
kind = "numerical"

[[feature]]
name = "shade"
kind = "categorical"
categories = ["low", "high"]
group = true
"#;

pub const ADULT_DEFAULT_ROWS: usize = 32_561;
pub const GERMAN_DEFAULT_ROWS: usize = 1_000;
pub const TOY_DEFAULT_ROWS: usize = 400;

/// Which synthetic corpus to generate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SynthFamily {
    Adult,
    German,
    Toy,
}

impl SynthFamily {
    pub fn schema_toml(&self) -> &'static str {
        match self {
            SynthFamily::Adult => ADULT_SCHEMA_TOML,
            SynthFamily::German => GERMAN_SCHEMA_TOML,
            SynthFamily::Toy => TOY_SCHEMA_TOML,
        }
    }

    pub fn default_rows(&self) -> usize {
        match self {
            SynthFamily::Adult => ADULT_DEFAULT_ROWS,
            SynthFamily::German => GERMAN_DEFAULT_ROWS,
            SynthFamily::Toy => TOY_DEFAULT_ROWS,
        }
    }

    pub fn csv(&self, rows: usize, seed: u64) -> String {
        match self {
            SynthFamily::Adult => adult_csv(rows, seed),
            SynthFamily::German => german_csv(rows, seed),
            SynthFamily::Toy => toy_csv(rows, seed),
        }
    }

    /// Generates and ingests in one step.
    pub fn dataset(&self, rows: usize, seed: u64) -> Result<Dataset, TabularError> {
        let config = SchemaConfig::from_toml(self.schema_toml())?;
        load_csv_str(&self.csv(rows, seed), &config)
    }
}

impl std::str::FromStr for SynthFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adult" => Ok(SynthFamily::Adult),
            "german" => Ok(SynthFamily::German),
            "toy" => Ok(SynthFamily::Toy),
            other => Err(format!("unknown synthetic family {other:?}")),
        }
    }
}

/// Standard normal via Box-Muller.
fn norm(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Weighted category pick; weights need not be normalized.
fn wpick(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn push_row(out: &mut String, cells: &[String]) {
    out.push_str(&cells.join(","));
    out.push('\n');
}

const SYNTH_TAG: u64 = 0x73796e7468;

/// Census-income-shaped corpus: 13 features (8 categorical, 5 numerical),
/// roughly one positive label in four.
pub fn adult_csv(rows: usize, seed: u64) -> String {
    let mut rng = derive_stream(seed, &[SYNTH_TAG, 1]);
    let mut out = String::with_capacity(rows * 96);
    out.push_str(
        "age,workclass,education,education_num,marital_status,occupation,relationship,\
         race,gender,capital_gain,capital_loss,hours_per_week,native_country,income\n",
    );

    let workclass = [
        "Private",
        "Self-emp-not-inc",
        "Self-emp-inc",
        "Local-gov",
        "State-gov",
        "Federal-gov",
        "Without-pay",
    ];
    let education = [
        "Preschool",
        "1st-4th",
        "5th-6th",
        "7th-8th",
        "9th",
        "10th",
        "11th",
        "12th",
        "HS-grad",
        "Some-college",
        "Assoc-voc",
        "Assoc-acdm",
        "Bachelors",
        "Masters",
        "Prof-school",
        "Doctorate",
    ];
    let edu_weights = [
        0.2, 0.5, 1.0, 2.0, 1.5, 2.8, 3.6, 1.3, 32.0, 22.0, 4.2, 3.2, 16.0, 5.4, 1.7, 1.2,
    ];
    let marital = ["Married", "Never-married", "Divorced", "Separated", "Widowed"];
    let occupation = [
        "Adm-clerical",
        "Craft-repair",
        "Exec-managerial",
        "Handlers-cleaners",
        "Machine-op-inspct",
        "Other-service",
        "Prof-specialty",
        "Sales",
        "Tech-support",
        "Transport-moving",
    ];
    let occ_low = [1.2, 1.8, 0.6, 1.2, 1.4, 1.8, 0.5, 1.0, 0.3, 1.2];
    let occ_high = [1.0, 0.4, 2.2, 0.15, 0.2, 0.5, 3.0, 1.2, 0.9, 0.3];
    let relationship = [
        "Husband",
        "Wife",
        "Own-child",
        "Not-in-family",
        "Unmarried",
        "Other-relative",
    ];
    let race = ["White", "Black", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other"];
    let country = [
        "United-States",
        "Mexico",
        "Philippines",
        "Germany",
        "Canada",
        "India",
        "England",
        "Other",
    ];

    for _ in 0..rows {
        let male = rng.gen::<f64>() < 0.67;
        let race_i = wpick(&mut rng, &[78.0, 10.0, 6.0, 3.0, 3.0]);
        let age = (38.0 + 13.0 * norm(&mut rng)).round().clamp(17.0, 90.0);

        let edu_i = wpick(&mut rng, &edu_weights);
        let edu_num = (edu_i + 1) as f64;
        let e = edu_i as f64 / 15.0;

        let p_married = 0.62 * sigmoid((age - 26.0) / 6.0);
        let married = rng.gen::<f64>() < p_married;
        let marital_i = if married {
            0
        } else {
            let never_w = 6.0 * (-(age - 17.0) / 18.0).exp() + 0.4;
            let widow_w = 0.05 + age / 120.0;
            1 + wpick(&mut rng, &[never_w, 1.0, 0.25, widow_w])
        };

        let occ_w: Vec<f64> = occ_low
            .iter()
            .zip(occ_high.iter())
            .map(|(lo, hi)| (1.0 - e) * lo + e * hi)
            .collect();
        let occ_i = wpick(&mut rng, &occ_w);

        let rel_i = if married {
            if rng.gen::<f64>() < 0.9 {
                if male {
                    0
                } else {
                    1
                }
            } else {
                3
            }
        } else if age < 25.0 {
            2 + wpick(&mut rng, &[5.5, 3.0, 1.0, 0.5])
        } else {
            2 + wpick(&mut rng, &[0.5, 5.5, 3.0, 1.0])
        };

        let work_i = wpick(&mut rng, &[69.5, 8.0, 3.5, 6.5, 4.0, 3.0, 0.5]);

        let mut hours = 40.0 + 10.2 * norm(&mut rng);
        if occ_i == 2 {
            hours += 4.0;
        }
        if work_i == 1 || work_i == 2 {
            hours += 3.0;
        }
        if age < 20.0 {
            hours -= 12.0;
        }
        let hours = hours.round().clamp(1.0, 99.0);

        let gain = if rng.gen::<f64>() < 0.03 + 0.09 * e {
            (8.6 + 0.8 * norm(&mut rng)).exp().round().clamp(100.0, 99_999.0)
        } else {
            0.0
        };
        let loss = if rng.gen::<f64>() < 0.047 {
            (7.5 + 0.35 * norm(&mut rng)).exp().round().clamp(100.0, 4_356.0)
        } else {
            0.0
        };

        let country_i = wpick(&mut rng, &[88.7, 2.0, 1.2, 1.2, 1.2, 1.2, 1.0, 3.5]);

        let mut z = 0.38 * (edu_num - 10.0);
        z += 0.045 * (age.min(58.0) - 38.0);
        z += 0.035 * (hours - 40.0);
        if married {
            z += 1.9;
        }
        z += match occ_i {
            2 => 0.65,
            6 => 0.55,
            8 => 0.30,
            3 => -0.40,
            5 => -0.60,
            4 => -0.25,
            _ => 0.0,
        };
        z += (gain / 2000.0).min(4.0);
        z += 0.8 * (loss / 1800.0).min(1.2);
        if male {
            z += 0.28;
        }
        z += match race_i {
            0 | 2 => 0.10,
            _ => -0.15,
        };
        z += match work_i {
            2 => 0.40,
            5 => 0.20,
            6 => -1.50,
            _ => 0.0,
        };
        let label = z + 1.05 * norm(&mut rng) > 2.9;

        push_row(
            &mut out,
            &[
                format_num(age),
                workclass[work_i].to_string(),
                education[edu_i].to_string(),
                format_num(edu_num),
                marital[marital_i].to_string(),
                occupation[occ_i].to_string(),
                relationship[rel_i].to_string(),
                race[race_i].to_string(),
                if male { "Male" } else { "Female" }.to_string(),
                format_num(gain),
                format_num(loss),
                format_num(hours),
                country[country_i].to_string(),
                if label { ">50K" } else { "<=50K" }.to_string(),
            ],
        );
    }
    out
}

/// Consumer-credit-shaped corpus: 24 features (17 categorical, 7 numerical),
/// roughly 70% positive (creditworthy) labels.
pub fn german_csv(rows: usize, seed: u64) -> String {
    let mut rng = derive_stream(seed, &[SYNTH_TAG, 2]);
    let mut out = String::with_capacity(rows * 160);
    out.push_str(
        "Age,Gender,Single,LoanDuration,LoanAmount,InstallmentRate,PurposeOfLoan,\
         YearsAtCurrentHome,NumOtherLoans,NumDependents,HasTelephone,NoCurrentLoan,\
         BankBalance,Housing,CreditHistory,SavingsBalance,EmploymentSince,OtherDebtors,\
         Property,OtherInstallmentPlans,Job,ForeignWorker,CriticalAccount,MissedPayments,credit\n",
    );

    let purpose = [
        "Electronics",
        "NewCar",
        "UsedCar",
        "Furniture",
        "Repairs",
        "Education",
        "Business",
        "Other",
    ];
    let bank = ["0", "0-200", "200+", "no-account"];
    let housing = ["Own", "Rent", "Free"];
    let history = ["Good", "Delayed", "Critical", "None"];
    let savings = ["<100", "100-500", "500-1000", ">1000", "unknown"];
    let employment = ["Unemployed", "<1", "1-4", "4-7", ">7"];
    let debtors = ["None", "CoApplicant", "Guarantor"];
    let property = ["RealEstate", "Savings", "Car", "None"];
    let plans = ["None", "Bank", "Stores"];
    let job = ["Unskilled", "Skilled", "Management", "SelfEmployed"];

    let tf = |b: bool| if b { "True" } else { "False" }.to_string();

    for _ in 0..rows {
        let age = (35.0 + 11.0 * norm(&mut rng)).round().clamp(19.0, 75.0);
        let male = rng.gen::<f64>() < 0.69;
        let single = rng.gen::<f64>() < if male { 0.55 } else { 0.35 };
        let duration = (21.0 + 12.0 * norm(&mut rng)).round().clamp(4.0, 72.0);
        let amount = (7.9 + 0.65 * norm(&mut rng)).exp().round().clamp(250.0, 18_424.0);
        let rate = 1.0 + wpick(&mut rng, &[14.0, 23.0, 16.0, 47.0]) as f64;
        let purpose_i = wpick(&mut rng, &[28.0, 23.0, 10.0, 18.0, 2.0, 5.0, 10.0, 4.0]);
        let years_home = 1.0 + wpick(&mut rng, &[13.0, 31.0, 15.0, 41.0]) as f64;
        let other_loans = wpick(&mut rng, &[63.0, 33.0, 3.0, 1.0]) as f64;
        let dependents = if rng.gen::<f64>() < 0.845 { 1.0 } else { 2.0 };
        let telephone = rng.gen::<f64>() < 0.40;
        let no_current = rng.gen::<f64>() < 0.33;
        let bank_i = wpick(&mut rng, &[27.0, 27.0, 6.0, 39.0]);
        let housing_i = wpick(&mut rng, &[71.0, 18.0, 11.0]);
        let history_i = wpick(&mut rng, &[53.0, 9.0, 29.0, 9.0]);
        let savings_i = wpick(&mut rng, &[60.0, 10.0, 6.0, 5.0, 18.0]);
        let emp_i = wpick(&mut rng, &[6.0, 17.0, 34.0, 17.0, 25.0]);
        let debtors_i = wpick(&mut rng, &[91.0, 4.0, 5.0]);
        let property_i = wpick(&mut rng, &[28.0, 23.0, 33.0, 15.0]);
        let plans_i = wpick(&mut rng, &[81.0, 14.0, 5.0]);
        let job_i = wpick(&mut rng, &[22.0, 60.0, 10.0, 8.0]);
        let foreign = rng.gen::<f64>() < 0.963;
        let critical = rng.gen::<f64>() < if history_i == 2 { 0.85 } else { 0.08 };
        let missed = rng.gen::<f64>() < if history_i == 1 || history_i == 2 { 0.70 } else { 0.10 };

        let mut z = match bank_i {
            0 => -1.10,
            1 => -0.35,
            2 => 0.50,
            _ => 0.55,
        };
        z += match history_i {
            0 => 0.35,
            1 => -0.20,
            2 => -0.80,
            _ => -0.30,
        };
        z += match savings_i {
            0 => -0.30,
            1 => -0.05,
            2 => 0.30,
            3 => 0.50,
            _ => 0.25,
        };
        z += -0.030 * (duration - 21.0);
        z += -0.00010 * (amount - 3000.0);
        z += match emp_i {
            0 => -0.50,
            1 => -0.25,
            2 => 0.0,
            3 => 0.15,
            _ => 0.30,
        };
        z += 0.012 * (age - 35.0);
        z += match housing_i {
            0 => 0.25,
            1 => -0.10,
            _ => 0.05,
        };
        if missed {
            z -= 0.55;
        }
        if critical {
            z -= 0.45;
        }
        z += -0.11 * (rate - 2.5);
        z += match debtors_i {
            1 => -0.15,
            2 => 0.35,
            _ => 0.0,
        };
        z += match purpose_i {
            1 => -0.12,
            2 => 0.25,
            5 => -0.20,
            6 => -0.05,
            _ => 0.0,
        };
        if male {
            z += 0.15;
        }
        if single {
            z -= 0.12;
        }
        if foreign {
            z -= 0.25;
        }
        let label = z + 0.95 * norm(&mut rng) > -1.49;

        push_row(
            &mut out,
            &[
                format_num(age),
                if male { "Male" } else { "Female" }.to_string(),
                tf(single),
                format_num(duration),
                format_num(amount),
                format_num(rate),
                purpose[purpose_i].to_string(),
                format_num(years_home),
                format_num(other_loans),
                format_num(dependents),
                tf(telephone),
                tf(no_current),
                bank[bank_i].to_string(),
                housing[housing_i].to_string(),
                history[history_i].to_string(),
                savings[savings_i].to_string(),
                employment[emp_i].to_string(),
                debtors[debtors_i].to_string(),
                property[property_i].to_string(),
                plans[plans_i].to_string(),
                job[job_i].to_string(),
                tf(foreign),
                tf(critical),
                tf(missed),
                if label { "good" } else { "bad" }.to_string(),
            ],
        );
    }
    out
}

/// Two-feature smoke corpus.
pub fn toy_csv(rows: usize, seed: u64) -> String {
    let mut rng = derive_stream(seed, &[SYNTH_TAG, 3]);
    let mut out = String::from("x,shade,y\n");
    for _ in 0..rows {
        let x: f64 = rng.gen();
        let high = rng.gen::<f64>() < 0.5;
        let z = 1.8 * x + if high { 0.5 } else { 0.0 } + 0.35 * norm(&mut rng);
        push_row(
            &mut out,
            &[
                format!("{x}"),
                if high { "high" } else { "low" }.to_string(),
                if z > 1.15 { "yes" } else { "no" }.to_string(),
            ],
        );
    }
    out
}
