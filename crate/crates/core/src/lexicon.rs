//! Bundled name pools for universe generation.
//!
//! Each theme supplies level labels and one name pool per level. Pools within
//! a theme are pairwise disjoint so that any draw without replacement yields
//! globally unique entity names.

/// A deterministic name source for one universe theme.
#[derive(Debug, Clone, Copy)]
pub struct Lexicon {
    /// Theme identifier, as accepted on the command line (`corporate`, ...).
    pub name: &'static str,
    /// Level labels from coarsest to finest.
    pub level_names: &'static [&'static str],
    /// One pool per level, same order as `level_names`.
    pub pools: &'static [&'static [&'static str]],
}

impl Lexicon {
    /// Number of levels this lexicon can name.
    pub fn max_depth(&self) -> usize {
        self.level_names.len()
    }
}

const CORPORATE_DIVISIONS: &[&str] = &[
    "Operations",
    "Research",
    "Development",
    "Marketing",
    "Finance",
    "Security",
    "Manufacturing",
    "Strategy",
    "Compliance",
    "Procurement",
    "Innovation",
    "Analytics",
];

const CORPORATE_DEPARTMENTS: &[&str] = &[
    "Support",
    "Logistics",
    "Robotics",
    "CoreAI",
    "AppliedSci",
    "Materials",
    "Platform",
    "Infrastructure",
    "Mobility",
    "Payments",
    "Risk",
    "Audit",
    "Branding",
    "Outreach",
    "Talent",
    "Facilities",
    "Forecasting",
    "Pricing",
    "Assurance",
    "Automation",
    "Synthesis",
    "Diagnostics",
    "Networks",
    "Storage",
    "Pipelines",
    "Interfaces",
    "Devices",
    "Sensors",
    "Controls",
    "Integration",
];

const CORPORATE_TEAMS: &[&str] = &[
    "Escalation",
    "Training",
    "Quality",
    "Freight",
    "Dispatch",
    "Routing",
    "Algorithms",
    "Compute",
    "Vision",
    "Language",
    "Polymers",
    "Alloys",
    "Nanocomposites",
    "Firmware",
    "Kernels",
    "Drivers",
    "Telemetry",
    "Billing",
    "Invoicing",
    "Ledger",
    "Campaigns",
    "Surveys",
    "Retention",
    "Onboarding",
    "Payroll",
    "Benefits",
    "Wellness",
    "Cabling",
    "Fixtures",
    "Inventory",
    "Demand",
    "Margins",
    "Rebates",
    "Warranty",
    "Inspection",
    "Calibration",
    "Assembly",
    "Welding",
    "Casting",
    "Molding",
    "Imaging",
    "Acoustics",
    "Optics",
    "Photonics",
    "Batteries",
    "Charging",
    "Cooling",
    "Insulation",
    "Antennas",
    "Receivers",
    "Encoders",
    "Actuators",
    "Gears",
    "Bearings",
    "Valves",
    "Pumps",
    "Turbines",
    "Filters",
    "Seals",
    "Gaskets",
];

const RESEARCH_INSTITUTES: &[&str] = &[
    "Heliophysics",
    "Genomics",
    "Neuroscience",
    "Astrobiology",
    "Climatology",
    "Oceanography",
    "Volcanology",
    "Seismology",
    "Metallurgy",
    "Cryogenics",
    "Botany",
    "Toxicology",
];

const RESEARCH_LABS: &[&str] = &[
    "Spectroscopy",
    "Microscopy",
    "Chromatography",
    "Lithography",
    "Crystallography",
    "Proteomics",
    "Enzymology",
    "Virology",
    "Immunology",
    "Mycology",
    "Entomology",
    "Ornithology",
    "Hydrology",
    "Glaciology",
    "Meteorology",
    "Petrology",
    "Mineralogy",
    "Paleontology",
    "Geodesy",
    "Cartography",
    "Photometry",
    "Interferometry",
    "Calorimetry",
    "Rheology",
    "Tribology",
    "Kinematics",
    "Statics",
    "Thermodynamics",
    "Electrostatics",
    "Magnetism",
];

const RESEARCH_GROUPS: &[&str] = &[
    "Qubits",
    "Entanglement",
    "Decoherence",
    "Plasmids",
    "Ribosomes",
    "Enzymes",
    "Synapses",
    "Axons",
    "Dendrites",
    "Cortex",
    "Exoplanets",
    "Pulsars",
    "Quasars",
    "Nebulae",
    "Comets",
    "Asteroids",
    "Monsoons",
    "Cyclones",
    "Currents",
    "Tides",
    "Reefs",
    "Plankton",
    "Magma",
    "Basalt",
    "Granite",
    "Tremors",
    "Faults",
    "Epicenters",
    "Ingots",
    "Smelting",
    "Annealing",
    "Cryostats",
    "Superfluids",
    "Condensates",
    "Orchids",
    "Ferns",
    "Mosses",
    "Lichens",
    "Venoms",
    "Antidotes",
    "Isotopes",
    "Neutrinos",
    "Muons",
    "Hadrons",
    "Leptons",
    "Photons",
    "Phonons",
    "Excitons",
    "Solvents",
    "Reagents",
    "Catalysts",
    "Titrations",
    "Dilutions",
    "Pipettes",
    "Beakers",
    "Microbes",
    "Spores",
    "Cultures",
    "Vaccines",
    "Antigens",
];

const GEO_COUNTRIES: &[&str] = &[
    "Valdoria",
    "Norvania",
    "Esperia",
    "Karthos",
    "Miravelle",
    "Thalassia",
    "Drevland",
    "Solmara",
    "Vintria",
    "Aurelis",
    "Costavia",
    "Zephyria",
];

const GEO_REGIONS: &[&str] = &[
    "Northmarch",
    "Southvale",
    "Eastmoor",
    "Westhollow",
    "Highcrest",
    "Lowfen",
    "Stonereach",
    "Riverlands",
    "Lakeshire",
    "Pinegrove",
    "Saltmarsh",
    "Goldplain",
    "Ironridge",
    "Copperfield",
    "Silverwood",
    "Ambercoast",
    "Mistvale",
    "Sunmeadow",
    "Frostholm",
    "Galeport",
    "Thornfield",
    "Bramblewick",
    "Cloudmont",
    "Duskmoor",
    "Dawnreach",
    "Emberfall",
    "Willowmere",
    "Foxglen",
    "Harrowgate",
    "Kestrelmoor",
];

const GEO_CITIES: &[&str] = &[
    "Brighthaven",
    "Stormwatch",
    "Oakendale",
    "Fernbrook",
    "Maplewick",
    "Cedarfall",
    "Ashforge",
    "Birchstead",
    "Elmsworth",
    "Rowanhill",
    "Hazelmere",
    "Aldergate",
    "Larkfield",
    "Wrenhollow",
    "Swanmere",
    "Heronbay",
    "Ospreymoor",
    "Falconrest",
    "Eaglemount",
    "Ravenspire",
    "Foxmere",
    "Badgerton",
    "Otterford",
    "Beavermarsh",
    "Moleshill",
    "Haremoor",
    "Stagbrook",
    "Doeford",
    "Elkhollow",
    "Bisonvale",
    "Millgrove",
    "Forgeburn",
    "Smithhollow",
    "Cooperstead",
    "Masonfell",
    "Thatchford",
    "Weaverton",
    "Tannerfield",
    "Fletchmoor",
    "Carterwick",
    "Glassmere",
    "Ironholt",
    "Steelgate",
    "Bronzebury",
    "Marbledale",
    "Graniteport",
    "Slatebrook",
    "Chalkhill",
    "Flintmoor",
    "Peatmarsh",
    "Sundermere",
    "Winterholt",
    "Summerfen",
    "Springvale",
    "Autumnwick",
    "Galehaven",
    "Thundertop",
    "Drizzlemoor",
    "Fogmouth",
    "Frostgate",
];

/// First names used for scenario targets.
pub const TARGET_NAMES: &[&str] = &[
    "Diana", "Olivia", "Carlos", "Maria", "Leo", "Chloe", "David", "Elena", "Marcus", "Priya",
    "Kenji", "Amara", "Lucas", "Nadia", "Omar", "Ingrid", "Mateo", "Yuki", "Zara", "Felix",
    "Hana", "Viktor", "Lena", "Ravi", "Sofia", "Dmitri", "Aisha", "Noel", "Greta", "Tomas",
    "Imani", "Oscar", "Freya", "Hugo", "Selin", "Pablo", "Mira", "Stefan", "Anya", "Jonas",
];

const CORPORATE: Lexicon = Lexicon {
    name: "corporate",
    level_names: &["division", "department", "team"],
    pools: &[CORPORATE_DIVISIONS, CORPORATE_DEPARTMENTS, CORPORATE_TEAMS],
};

const RESEARCH: Lexicon = Lexicon {
    name: "research",
    level_names: &["institute", "lab", "group"],
    pools: &[RESEARCH_INSTITUTES, RESEARCH_LABS, RESEARCH_GROUPS],
};

const GEOGRAPHIC: Lexicon = Lexicon {
    name: "geographic",
    level_names: &["country", "region", "city"],
    pools: &[GEO_COUNTRIES, GEO_REGIONS, GEO_CITIES],
};

/// All bundled lexicons.
pub const ALL: &[Lexicon] = &[CORPORATE, RESEARCH, GEOGRAPHIC];

/// Look up a bundled lexicon by theme id.
pub fn by_name(theme: &str) -> Option<&'static Lexicon> {
    ALL.iter().find(|l| l.name == theme)
}
