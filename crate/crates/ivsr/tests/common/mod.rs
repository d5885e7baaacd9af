#![allow(dead_code)]

use ivsr::files::{SensorBindings, SensorDoc, SensorsDoc, SiteDoc};
use ivsr::gateway::Gateway;
use ivsr::twin::{twin_for, Twin};
use ivsr_core::camera::CameraPose;
use ivsr_core::geometry::Scene;
use ivsr_core::library::{
    Action, ActionKind, FeatureVector, InterventionPlan, MaterialClass, ObjectFlags, ScenarioRecord, Severity, Target,
};
use ivsr_core::spread::MaterialProfile;
use ivsr_core::status::{Availability, ResourceEntry, ResourceKind};
use ivsr_core::Vec3;

pub const SAMPLE: &str = include_str!("../fixtures/sample_detection.ndjson");

pub fn camera() -> CameraPose {
    CameraPose::new(Vec3::new(0.2, 0.2, 2.8), 45.0, -25.0, 0.0, 90.0, 70.0)
}

pub fn sensors() -> SensorBindings {
    let doc = SensorsDoc {
        default: None,
        sensors: vec![
            SensorDoc {
                sensor_id: "cam-1".into(),
                camera: (&camera()).into(),
            },
            // above the room, looking at the sky
            SensorDoc {
                sensor_id: "sky".into(),
                camera: (&CameraPose::new(Vec3::new(5.0, 5.0, 3.0), 0.0, 80.0, 0.0, 60.0, 45.0)).into(),
            },
        ],
    };
    SensorBindings::new(doc).unwrap()
}

pub fn materials() -> Vec<MaterialProfile> {
    vec![MaterialProfile::new("wood", 8.0, 0.1).unwrap()]
}

pub fn site() -> SiteDoc {
    let entry = |kind, count, position| ResourceEntry {
        kind,
        count,
        position,
        availability: Availability::Available,
    };
    SiteDoc {
        resources: vec![
            entry(ResourceKind::Firefighter, 20, None),
            entry(ResourceKind::FireTruck, 5, None),
            entry(ResourceKind::Helicopter, 2, None),
            entry(ResourceKind::Ambulance, 1, None),
            entry(ResourceKind::Drone, 2, Some(Vec3::new(9.0, 9.0, 1.5))),
        ],
        material_class: Some(MaterialClass::IndoorResidential),
        objects_in_path: ObjectFlags {
            structures: true,
            ..Default::default()
        },
        drone_base: None,
    }
}

fn plan(id: &str, actions: Vec<Action>, scores: (f64, f64, f64)) -> InterventionPlan {
    InterventionPlan {
        id: id.into(),
        actions,
        effectiveness: scores.0,
        cost_efficiency: scores.1,
        response_speed: scores.2,
    }
}

fn act(kind: ActionKind, target: Target, quantity: u32) -> Action {
    Action { kind, target, quantity }
}

/// Features the sample detection produces in [`twin`]: a 107 degree reading,
/// the site's register and class, calm default weather.
pub fn live_features() -> FeatureVector {
    FeatureVector {
        severity: Severity::High,
        responders: 20,
        fire_trucks: 5,
        helicopters: 2,
        ambulances: 1,
        material_class: Some(MaterialClass::IndoorResidential),
        wind_speed: 0.0,
        wind_direction: 0.0,
        spread_rate: 0.0,
        max_temp: 107.0,
        objects_in_path: ObjectFlags {
            structures: true,
            ..Default::default()
        },
    }
}

/// Three scenarios; `indoor-small` mirrors the live incident, the others are far off.
pub fn library() -> Vec<ScenarioRecord> {
    let room = Target::Zone("room".into());
    vec![
        ScenarioRecord {
            id: "forest-gale".into(),
            features: FeatureVector {
                severity: Severity::Low,
                material_class: Some(MaterialClass::ForestDryVegetation),
                wind_speed: 110.0,
                wind_direction: 180.0,
                spread_rate: 9.0,
                max_temp: 1100.0,
                ..Default::default()
            },
            growth: vec![0.0, 40.0, 200.0, 900.0],
            plans: vec![plan(
                "aerial",
                vec![act(ActionKind::AerialDrop, Target::Zone("ridge".into()), 4)],
                (0.95, 0.95, 0.95),
            )],
        },
        ScenarioRecord {
            id: "indoor-small".into(),
            features: live_features(),
            growth: vec![0.0],
            plans: vec![
                plan(
                    "crew-only",
                    vec![act(ActionKind::DeployCrew, room.clone(), 4)],
                    (0.7, 0.9, 0.5),
                ),
                plan(
                    "drone-recon",
                    vec![
                        act(ActionKind::DeployDrone, Target::Point(Vec3::new(5.0, 5.0, 1.5)), 3),
                        act(ActionKind::DeployCrew, room.clone(), 25),
                    ],
                    (0.9, 0.6, 0.8),
                ),
            ],
        },
        ScenarioRecord {
            id: "urban-plant".into(),
            features: FeatureVector {
                severity: Severity::Medium,
                responders: 80,
                fire_trucks: 30,
                material_class: Some(MaterialClass::UrbanIndustrial),
                wind_speed: 40.0,
                max_temp: 600.0,
                ..Default::default()
            },
            growth: vec![0.0, 10.0, 30.0],
            plans: vec![plan(
                "foam",
                vec![act(ActionKind::DeployTruck, Target::Zone("plant".into()), 10)],
                (0.8, 0.5, 0.6),
            )],
        },
    ]
}

pub fn twin() -> Twin {
    twin_for(
        Scene::room(10.0, 10.0, 3.0, "wood").unwrap(),
        0.25,
        sensors(),
        materials(),
        library(),
        site(),
    )
    .unwrap()
}

/// Serves the gateway on an ephemeral port; returns the base URL.
pub async fn serve(gw: &Gateway) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = gw.router();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}")
}
