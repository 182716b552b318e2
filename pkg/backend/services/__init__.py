# Services module exports
from .region_service import region_service, RegionService
from .predictor_service import predictor_service, PredictorService
from .allocation_service import allocation_service, AllocationService
from .simulation_service import simulation_service, SimulationService
