//! Geometric priors: KNN normals from sensor depth, the depth-normal
//! consistency (DNC) and adaptive normal regularisation (ANR) filters, and
//! the step-scheduled losses that consume their outputs.

mod filters;
mod losses;
mod normals;
pub mod ssim;

pub use filters::{
    anr_filter_normals, dnc_filter_depth, dnc_filter_frame, AnrConfig, DncConfig, FilterReport,
};
pub use losses::{
    color_loss, depth_loss, depth_loss_counted, evaluate_losses, normal_loss, normal_loss_counted,
    total_loss, LossInputs, LossReport, LossSchedule, SSIM_WEIGHT,
};
pub use normals::{
    depth_normals_knn, estimate_point_normals_knn, pca_normal, render_normal_from_depth,
    CovarianceCenter,
};
