//! Named schemes.
//!
//! The three weak-stage-order schemes are stored exactly as their decimal
//! coefficients were published. The comparison schemes are classical
//! L-stable, stiffly accurate DIRKs of stage order 1 (and one stage-order-2
//! EDIRK) that serve as the order-reduction baseline.

use std::sync::OnceLock;

use super::ButcherTableau;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct RegistryEntry {
    pub name: &'static str,
    pub tableau: ButcherTableau,
}

pub fn registry() -> &'static [RegistryEntry] {
    static REGISTRY: OnceLock<Vec<RegistryEntry>> = OnceLock::new();
    REGISTRY.get_or_init(build)
}

pub fn registry_names() -> Vec<&'static str> {
    registry().iter().map(|e| e.name).collect()
}

pub fn registry_get(name: &str) -> Result<ButcherTableau> {
    registry()
        .iter()
        .find(|e| e.name == name)
        .map(|e| e.tableau.clone())
        .ok_or_else(|| Error::UnknownScheme {
            name: name.to_string(),
            available: registry_names().into_iter().map(String::from).collect(),
        })
}

fn entry(name: &'static str, tableau: Result<ButcherTableau>) -> RegistryEntry {
    let tableau = tableau.expect("registry tableau is well formed").with_name(name);
    RegistryEntry { name, tableau }
}

fn build() -> Vec<RegistryEntry> {
    vec![
        entry("wso2-p3", wso2_p3()),
        entry("wso3-p3", wso3_p3()),
        entry("wso3-p4", wso3_p4()),
        entry("wso1-p3", alexander_sdirk3()),
        entry("wso1-p4", hairer_wanner_sdirk4()),
        entry("edirk-so2-p3", kennedy_carpenter_esdirk3()),
        entry("backward-euler", backward_euler()),
    ]
}

fn wso2_p3() -> Result<ButcherTableau> {
    Ok(ButcherTableau::lower_triangular(
        &[
            &[0.01900072890],
            &[0.40434605601, 0.38435717512],
            &[0.06487908412, -0.16389640295, 0.51545231222],
            &[0.02343549374, -0.41207877888, 0.96661161281, 0.42203167233],
        ],
        None,
        "wso2-p3",
    )?
    .with_claims(Some(3), Some(2))
    .with_provenance("4-stage stiffly accurate L-stable DIRK, order 3, weak stage order 2"))
}

fn wso3_p3() -> Result<ButcherTableau> {
    Ok(ButcherTableau::lower_triangular(
        &[
            &[0.13756543551],
            &[0.56695122794, 0.23483888782],
            &[-1.08354072813, 2.96618223864, 0.44915521951],
            &[0.59761291500, -0.43420997584, -0.05305815322, 0.88965521406],
        ],
        None,
        "wso3-p3",
    )?
    .with_claims(Some(3), Some(3))
    .with_provenance("4-stage stiffly accurate L-stable DIRK, order 3, weak stage order 3"))
}

fn wso3_p4() -> Result<ButcherTableau> {
    Ok(ButcherTableau::lower_triangular(
        &[
            &[0.079672377876931],
            &[0.328355391763968, 0.136009256546967],
            &[-0.650772774016417, 1.742859063495349, 0.256472952467792],
            &[-0.714580550967259, 1.793745752775934, -0.078254785672497, 0.311753794172585],
            &[
                -1.120092779092918,
                1.983452339867353,
                3.117393885836001,
                -3.761930177913743,
                0.770646024799205,
            ],
            &[
                0.214823667785537,
                0.536367363903245,
                0.154488125726409,
                -0.217748592703941,
                0.072226422925896,
                0.239843012362853,
            ],
        ],
        None,
        "wso3-p4",
    )?
    .with_claims(Some(4), Some(3))
    .with_provenance("6-stage stiffly accurate L-stable DIRK, order 4, weak stage order 3"))
}

/// Alexander (1977), 3-stage SDIRK of order 3. The diagonal is the root of
/// `x^3 - 3x^2 + 3x/2 - 1/6` in (1/6, 1/2).
fn alexander_sdirk3() -> Result<ButcherTableau> {
    let g: f64 = 0.435_866_521_508_458_999_416_019_45;
    let tau2 = (1.0 + g) / 2.0;
    let b1 = -(6.0 * g * g - 16.0 * g + 1.0) / 4.0;
    let b2 = (6.0 * g * g - 20.0 * g + 5.0) / 4.0;
    Ok(ButcherTableau::lower_triangular(&[&[g], &[tau2 - g, g], &[b1, b2, g]], None, "wso1-p3")?
        .with_claims(Some(3), Some(1))
        .with_provenance("Alexander (1977) L-stable SDIRK3, stage order 1 reference"))
}

/// Hairer & Wanner, Solving ODEs II, Table IV.6.5: 5-stage L-stable SDIRK of
/// order 4 with `γ = 1/4`.
fn hairer_wanner_sdirk4() -> Result<ButcherTableau> {
    Ok(ButcherTableau::lower_triangular(
        &[
            &[1.0 / 4.0],
            &[1.0 / 2.0, 1.0 / 4.0],
            &[17.0 / 50.0, -1.0 / 25.0, 1.0 / 4.0],
            &[371.0 / 1360.0, -137.0 / 2720.0, 15.0 / 544.0, 1.0 / 4.0],
            &[25.0 / 24.0, -49.0 / 48.0, 125.0 / 16.0, -85.0 / 12.0, 1.0 / 4.0],
        ],
        None,
        "wso1-p4",
    )?
    .with_claims(Some(4), Some(1))
    .with_provenance("Hairer-Wanner L-stable SDIRK4 (gamma = 1/4), stage order 1 reference"))
}

/// Kennedy & Carpenter (2003), implicit part of ARK3(2)4L[2]SA: an L-stable,
/// stiffly accurate ESDIRK of order 3 and stage order 2.
fn kennedy_carpenter_esdirk3() -> Result<ButcherTableau> {
    let g = 1_767_732_205_903.0 / 4_055_673_282_236.0;
    let a31 = 2_746_238_789_719.0 / 10_658_868_560_708.0;
    let a32 = -640_167_445_237.0 / 6_845_629_431_997.0;
    let b1 = 1_471_266_399_579.0 / 7_840_856_788_654.0;
    let b2 = -4_482_444_167_858.0 / 7_529_755_066_697.0;
    let b3 = 11_266_239_266_428.0 / 11_593_286_722_821.0;
    Ok(ButcherTableau::lower_triangular(
        &[&[0.0], &[g, g], &[a31, a32, g], &[b1, b2, b3, g]],
        None,
        "edirk-so2-p3",
    )?
    .with_claims(Some(3), Some(2))
    .with_provenance("Kennedy-Carpenter ESDIRK3(2)4L[2]SA, stage order 2 reference"))
}

fn backward_euler() -> Result<ButcherTableau> {
    Ok(ButcherTableau::lower_triangular(&[&[1.0]], None, "backward-euler")?
        .with_claims(Some(1), Some(1))
        .with_provenance("backward Euler"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_coefficients_are_verbatim() {
        let t = registry_get("wso2-p3").unwrap();
        assert_eq!(
            t.b().as_slice(),
            &[0.02343549374, -0.41207877888, 0.96661161281, 0.42203167233]
        );
        let t = registry_get("wso3-p3").unwrap();
        assert_eq!(t.stages(), 4);
        assert_eq!(t.a()[(0, 0)], 0.13756543551);
        let t = registry_get("wso3-p4").unwrap();
        assert_eq!(t.stages(), 6);
        assert_eq!(t.a()[(0, 0)], 0.079672377876931);
    }

    #[test]
    fn every_scheme_is_consistent() {
        for e in registry() {
            let t = &e.tableau;
            assert_eq!(t.name(), e.name);
            assert!(t.row_sum_defect() < 1e-12, "{}", e.name);
            assert!(t.is_dirk(), "{}", e.name);
            assert!(t.is_stiffly_accurate(), "{}", e.name);
            assert!(t.provenance().is_some());
        }
    }

    #[test]
    fn weak_stage_order_schemes_have_positive_diagonal() {
        for name in ["wso2-p3", "wso3-p3", "wso3-p4"] {
            let t = registry_get(name).unwrap();
            assert!(t.a().diagonal().iter().all(|d| *d > 0.0), "{name}");
        }
    }

    #[test]
    fn unknown_name_lists_available() {
        match registry_get("rk4") {
            Err(Error::UnknownScheme { available, .. }) => {
                assert!(available.iter().any(|n| n == "wso3-p4"));
            }
            other => panic!("expected UnknownScheme, got {other:?}"),
        }
    }
}
