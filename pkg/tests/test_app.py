import pytest

from app import create_app

COMMON = {'n_consumers': 2, 'alpha': 1.0, 'beta': 0.0, 'sigma': 1.0}


@pytest.fixture
def client():
    app = create_app({'TESTING': True, 'MAX_DRAWS': 50000})
    return app.test_client()


def test_eval(client):
    response = client.post('/api/eval', json=COMMON)
    assert response.status_code == 200
    body = response.get_json()
    assert body['revenue'] == 0.208333333333
    assert list(body)[:2] == ['g_full', 'g_loo']


def test_eval_rejects_invalid_fields(client):
    response = client.post('/api/eval', json=dict(COMMON, alpha=2.0))
    assert response.status_code == 400
    assert response.get_json()['field'] == 'alpha'

    response = client.post('/api/eval', json=dict(COMMON, colour='red'))
    assert response.get_json()['field'] == 'colour'

    response = client.post('/api/eval', data='not json', content_type='text/plain')
    assert response.status_code == 400


def test_sweep(client):
    payload = dict(COMMON, alpha=0.5, policy='Anonymized', param='alpha', grid=[0, 0.5, 1])
    response = client.post('/api/sweep', json=payload)
    assert response.status_code == 200
    rows = response.get_json()['rows']
    assert [row['revenue'] for row in rows] == pytest.approx([-0.0625, -0.01875, 0.208333333333])


def test_sweep_as_csv(client):
    payload = dict(COMMON, param='n_consumers', grid=[1, 2, 3])
    response = client.post('/api/sweep?format=csv', json=payload)
    assert response.mimetype == 'text/csv'
    assert len(response.get_data(as_text=True).splitlines()) == 4


def test_sweep_needs_a_grid(client):
    response = client.post('/api/sweep', json=dict(COMMON, param='alpha'))
    assert response.status_code == 400
    assert response.get_json()['field'] == 'grid'
    response = client.post('/api/sweep', json=dict(COMMON, param='alpha', grid=['a']))
    assert response.status_code == 400


def test_figure(client):
    response = client.get('/api/figure/compensation?alpha=0.5&grid=1,2,3')
    assert response.status_code == 200
    assert [row['n'] for row in response.get_json()['rows']] == [1, 2, 3]

    assert client.get('/api/figure/compensation').status_code == 400
    assert client.get('/api/figure/foo').get_json()['field'] == 'figure'


def test_optimize_noise(client):
    response = client.post('/api/optimize-noise', json=dict(COMMON, alpha=0.5))
    assert response.status_code == 200
    assert response.get_json()['boundary'] == 'Interior'


def test_segment(client):
    payload = dict(COMMON, alpha=0.5, group_sizes=[1, 1], group_common_vars=[0.5, 0.5],
                   group_idio_vars=[0.5, 0.5], group_noise_scales=[1.0, 1.0], n_range=list(range(1, 51)))
    response = client.post('/api/segment', json=payload)
    assert response.status_code == 200
    body = response.get_json()
    assert body['recommended'] == 'Pooled'
    assert body['crossover_n'] > 1

    assert client.post('/api/segment', json=COMMON).status_code == 400


def test_mc_check(client):
    response = client.post('/api/mc-check', json=dict(COMMON, draws=20000, seed=3))
    assert response.status_code == 200
    body = response.get_json()
    assert body['passed'] is True
    assert body['draws'] == 20000

    assert client.post('/api/mc-check', json=dict(COMMON, draws=60000)).status_code == 400


def test_mc_check_needs_enough_draws(client):
    response = client.post('/api/mc-check', json=dict(COMMON, draws=5000))
    assert response.status_code == 400
    assert response.get_json()['field'] == 'draws'


def test_segment_rejects_fractional_sizes(client):
    payload = dict(COMMON, group_sizes=[1, 1], group_common_vars=[0.5, 0.5],
                   group_idio_vars=[0.5, 0.5], group_noise_scales=[1.0, 1.0], n_range=[2.5])
    response = client.post('/api/segment', json=payload)
    assert response.status_code == 400
    assert response.get_json()['field'] == 'n_range'

    response = client.get('/api/figure/compensation?alpha=0.5&grid=2.5')
    assert response.status_code == 400
    assert response.get_json()['field'] == 'grid'
