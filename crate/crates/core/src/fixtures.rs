//! Small networks shipped with the crate for tests, examples and demos.
//!
//! * `three_bus`: chain `0 -> 1 -> 2`, `r = 0.01`, `x = 0.02` p.u. per
//!   line, one time step, no baseline load. With EV load `psi_1, psi_2`
//!   (p.u.) at buses 1 and 2, the lossless voltage at bus 2 is
//!   `1 - 0.02 (psi_1 + 2 psi_2)`, so the undervoltage boundary is close to
//!   `psi_1 + 2 psi_2 = 4.875` and crosses the box `[0, 4]^2`.
//! * `feeder15`: 15 buses, 144 ten-minute steps, residential baseline with
//!   an evening peak; a long weak branch (buses 5-8) and a PV lateral
//!   (buses 9-12). Clusters `A` (weak branch end) and `B` (PV lateral).

use std::path::PathBuf;

use crate::error::Result;
use crate::generate::Cluster;
use crate::grid::Network;
use crate::profiles::{ProfileLibrary, ProfileSet};
use crate::scenario::DerKind;

pub const THREE_BUS_JSON: &str = include_str!("../fixtures/three_bus.json");
pub const FEEDER15_JSON: &str = include_str!("../fixtures/feeder15.json");
pub const FEEDER15_CLUSTERS_JSON: &str = include_str!("../fixtures/feeder15_clusters.json");

/// Directory holding the fixture files.
pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn three_bus() -> Network {
    Network::from_json_str(THREE_BUS_JSON).expect("three_bus fixture parses")
}

/// EV type 0 draws full rating; PV type 0 is idle.
pub fn three_bus_profiles() -> ProfileLibrary {
    ProfileLibrary::new(
        ProfileSet::constant(DerKind::Ev, 1, -1.0),
        ProfileSet::constant(DerKind::Pv, 1, 0.0),
    )
    .expect("constant profiles are valid")
}

pub fn feeder15() -> Network {
    Network::from_json_str(FEEDER15_JSON).expect("feeder15 fixture parses")
}

pub fn feeder15_clusters() -> Result<Vec<Cluster>> {
    Ok(serde_json::from_str(FEEDER15_CLUSTERS_JSON)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::validate_network;

    #[test]
    fn fixtures_are_valid() {
        for net in [three_bus(), feeder15()] {
            let report = validate_network(&net);
            assert!(report.is_valid(), "{report}");
        }
        assert_eq!(feeder15().steps(), 144);
        assert_eq!(feeder15_clusters().unwrap().len(), 2);
    }
}
