//! Concrete objectives for [`crate::optimizer`].

use crate::cavity::{self, CavityParams};
use crate::error::Result;
use crate::free_space::{self, FreeSpaceParams, RetrievalDirection, RetrievalKernel, RetrievalWindow};
use crate::numerics::{SpaceGrid, C64};
use crate::optimizer::{ControlProblem, Evaluation};
use crate::profile::InhomProfile;
use crate::signal::{ControlField, InputMode};

fn real_gradient(g: Vec<f64>) -> Vec<C64> {
    g.into_iter().map(|v| C64::new(v, 0.0)).collect()
}

/// `|S(T)|²` in the simple resonant cavity model.
#[derive(Debug, Clone)]
pub struct CavityStorage {
    pub input: InputMode,
    pub params: CavityParams,
}

impl ControlProblem for CavityStorage {
    fn evaluate(&self, control: &ControlField) -> Result<Evaluation> {
        let (efficiency, g, _, _) = cavity::efficiency_and_gradient(control, &self.input, &self.params)?;
        Ok(Evaluation { efficiency, gradient: real_gradient(g) })
    }

    fn efficiency(&self, control: &ControlField) -> Result<f64> {
        Ok(cavity::storage_forward(control, &self.input, &self.params)?.storage_efficiency())
    }
}

/// `|Σ x_j S_j(T)|²` in the generalized cavity model, complex control.
#[derive(Debug, Clone)]
pub struct GeneralizedCavityStorage {
    pub input: InputMode,
    pub params: CavityParams,
    pub profile: InhomProfile,
}

impl ControlProblem for GeneralizedCavityStorage {
    fn evaluate(&self, control: &ControlField) -> Result<Evaluation> {
        let traj = cavity::generalized_forward(control, &self.input, &self.params, &self.profile)?;
        let adj = cavity::generalized_adjoint(control, traj.final_spin(), &self.params, &self.profile)?;
        Ok(Evaluation {
            efficiency: traj.storage_efficiency(),
            gradient: cavity::generalized_gradient(&traj, &adj)?,
        })
    }

    fn efficiency(&self, control: &ControlField) -> Result<f64> {
        let traj = cavity::generalized_forward(control, &self.input, &self.params, &self.profile)?;
        Ok(traj.storage_efficiency())
    }

    fn real_control(&self) -> bool {
        false
    }
}

/// `∫|S(z, T)|² dz` in free space.
#[derive(Debug, Clone)]
pub struct FreeSpaceStorage {
    pub input: InputMode,
    pub params: FreeSpaceParams,
    pub space: SpaceGrid,
}

impl ControlProblem for FreeSpaceStorage {
    fn evaluate(&self, control: &ControlField) -> Result<Evaluation> {
        let (efficiency, g) =
            free_space::efficiency_and_gradient(control, &self.input, &self.params, &self.space)?;
        Ok(Evaluation { efficiency, gradient: real_gradient(g) })
    }

    fn efficiency(&self, control: &ControlField) -> Result<f64> {
        Ok(free_space::storage_forward(control, &self.input, &self.params, &self.space)?.storage_efficiency())
    }
}

/// Storage followed by retrieval with a fixed retrieval control.
#[derive(Debug, Clone)]
pub struct FreeSpaceStorageRetrieval {
    pub input: InputMode,
    pub params: FreeSpaceParams,
    pub space: SpaceGrid,
    pub window: RetrievalWindow,
}

impl ControlProblem for FreeSpaceStorageRetrieval {
    fn evaluate(&self, control: &ControlField) -> Result<Evaluation> {
        let (run, g) = free_space::total_efficiency_and_gradient(
            control,
            &self.window,
            &self.input,
            &self.params,
            &self.space,
        )?;
        Ok(Evaluation { efficiency: run.total_efficiency, gradient: real_gradient(g) })
    }
}

/// Storage followed by complete retrieval, scored by the retrieval kernel:
/// `η = ∫∫ k(z, z') S*(z, T) S(z', T)`, with adjoint terminal `S̄ = K S`.
#[derive(Debug, Clone)]
pub struct FreeSpaceCompleteRetrieval {
    pub input: InputMode,
    pub params: FreeSpaceParams,
    pub space: SpaceGrid,
    kernel: RetrievalKernel,
}

impl FreeSpaceCompleteRetrieval {
    pub fn new(
        input: InputMode,
        params: FreeSpaceParams,
        space: SpaceGrid,
        direction: RetrievalDirection,
    ) -> Self {
        let kernel = RetrievalKernel::new(&params, &space, direction);
        Self { input, params, space, kernel }
    }

    pub fn kernel(&self) -> &RetrievalKernel {
        &self.kernel
    }
}

impl ControlProblem for FreeSpaceCompleteRetrieval {
    fn evaluate(&self, control: &ControlField) -> Result<Evaluation> {
        let fields = free_space::storage_forward(control, &self.input, &self.params, &self.space)?;
        let spin = fields.final_spin();
        let terminal = self.kernel.apply(&spin);
        let adj = free_space::adjoint_backward(control, &terminal, &self.params, &self.space)?;
        Ok(Evaluation {
            efficiency: self.kernel.efficiency(&spin),
            gradient: real_gradient(free_space::control_gradient(&fields, &adj)?),
        })
    }

    fn efficiency(&self, control: &ControlField) -> Result<f64> {
        let fields = free_space::storage_forward(control, &self.input, &self.params, &self.space)?;
        Ok(self.kernel.efficiency(&fields.final_spin()))
    }
}
