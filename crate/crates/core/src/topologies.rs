//! Built-in network files.

/// Seven-edge, two-relay graph with the identity configuration over GF(2).
pub const TOPO_A_FIG1: &str = include_str!("../topologies/topo_a_fig1.json");
/// Two-relay, single-destination graph used for the topology a goodput table.
pub const TOPO_A_TABLE: &str = include_str!("../topologies/topo_a_table.json");
/// Butterfly with two destinations and three relays.
pub const TOPO_B: &str = include_str!("../topologies/topo_b.json");
/// Empty graph carrying the published topology c table as unverified reference data.
pub const TOPO_C: &str = include_str!("../topologies/topo_c.json");

/// `(name, contents)` of every built-in file.
pub const BUILTIN: [(&str, &str); 4] =
    [("topo_a_fig1", TOPO_A_FIG1), ("topo_a_table", TOPO_A_TABLE), ("topo_b", TOPO_B), ("topo_c", TOPO_C)];

pub fn builtin(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, c)| *c)
}
