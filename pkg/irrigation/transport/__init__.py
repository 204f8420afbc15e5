from .wasserstein import (PLAN_CSV_HEADER, TransportPlan, bb_gap, plan_to_csv,
                          straight_transport_flow, wasserstein2)

__all__ = ['PLAN_CSV_HEADER', 'TransportPlan', 'bb_gap', 'plan_to_csv', 'straight_transport_flow',
           'wasserstein2']
